use std::io::Write;

use rayon::prelude::*;

use super::{least_squares_slope, lp_norm_with_se, with_pool};
use crate::error::{invalid, Result, SveError};
use crate::mesh::GradedMesh;
use crate::noise::{path_seed, sample_path};
use crate::problem::SveProblem;
use crate::schemes::em::{em_states, EmWeights};

const BATCH: usize = 256;

/// Monte Carlo estimate of `‖x(t) - x(s)‖_{L²}` at pairs of reference-mesh
/// nodes, with the reference solved by EM.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityConfig {
    pub n_ref: usize,
    pub r: f64,
    pub paths: usize,
    pub seed: u64,
    /// Node-index pairs `(s, t)` at a fixed `s` away from the origin; the
    /// fitted exponent is the slope against `t - s`.
    pub interior: Vec<(usize, usize)>,
    /// Pairs approaching the origin at a fixed ratio `t / s`; the fitted
    /// exponent is the slope against `s`.
    pub origin: Vec<(usize, usize)>,
    pub threads: Option<usize>,
}

impl RegularityConfig {
    /// Interior pairs `(N/2, N/2 + 2^k)`, `k = 0..=6`, and origin pairs
    /// `(2^k, 2^{k+1})`, `k = 0..=4`, which on a graded mesh have
    /// `t / s = 2^r`.
    pub fn new(n_ref: usize, r: f64, paths: usize, seed: u64) -> Self {
        let mid = n_ref / 2;
        Self {
            n_ref,
            r,
            paths,
            seed,
            interior: (0..=6)
                .map(|k| (mid, mid + (1 << k)))
                .filter(|&(_, t)| t <= n_ref)
                .collect(),
            origin: (0..=4)
                .map(|k| (1 << k, 2 << k))
                .filter(|&(_, t)| t <= n_ref)
                .collect(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityRow {
    /// `"interior"` or `"origin"`.
    pub group: &'static str,
    pub s_index: usize,
    pub t_index: usize,
    pub s: f64,
    pub t: f64,
    pub modulus: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub rows: Vec<RegularityRow>,
    /// Slope of `ln modulus` against `ln(t - s)` over the interior pairs.
    pub interior_exponent: Option<f64>,
    /// Slope of `ln modulus` against `ln s` over the origin pairs.
    pub origin_exponent: Option<f64>,
}

impl RegularityReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "group,s_index,t_index,s,t,modulus,se")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:e},{:e},{:e},{:e}",
                r.group, r.s_index, r.t_index, r.s, r.t, r.modulus, r.se
            )?;
        }
        let fmt = |o: Option<f64>| o.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        writeln!(out, "# interior_exponent={}", fmt(self.interior_exponent))?;
        writeln!(out, "# origin_exponent={}", fmt(self.origin_exponent))?;
        Ok(())
    }
}

/// Estimate the `L²` modulus of continuity of the solution at the given
/// node pairs and fit the local Hölder exponents.
pub fn regularity_probe(
    problem: &SveProblem,
    config: &RegularityConfig,
) -> Result<RegularityReport> {
    if config.paths == 0 {
        return Err(invalid("paths must be at least 1"));
    }
    let pairs: Vec<(&'static str, usize, usize)> = config
        .interior
        .iter()
        .map(|&(s, t)| ("interior", s, t))
        .chain(config.origin.iter().map(|&(s, t)| ("origin", s, t)))
        .collect();
    if pairs.is_empty() {
        return Err(invalid("no node pairs given"));
    }
    if let Some(&(_, s, t)) = pairs
        .iter()
        .find(|&&(_, s, t)| s == 0 || s > t || t > config.n_ref)
    {
        return Err(SveError::IndexOutOfRange(format!(
            "pair ({s}, {t}) needs 0 < s <= t <= {}",
            config.n_ref
        )));
    }
    let mesh = GradedMesh::new(problem.horizon(), config.n_ref, config.r)?;
    let last = pairs.iter().map(|&(_, _, t)| t).max().unwrap_or(1);
    let weights = EmWeights::truncated(&mesh, problem.alpha(), problem.beta(), last)?;
    let d = problem.state_dim();
    let m = problem.noise_dim();

    let one_path = |index: usize| -> Result<Vec<f64>> {
        let path = sample_path(&mesh, m, path_seed(config.seed, index as u64))?;
        let x = em_states(&weights, problem, path.increments(), last)?;
        Ok(pairs
            .iter()
            .map(|&(_, s, t)| (0..d).map(|c| (x[t * d + c] - x[s * d + c]).powi(2)).sum())
            .collect())
    };

    let mut sum = vec![0.0; pairs.len()];
    let mut sum_sq = vec![0.0; pairs.len()];
    with_pool(config.threads, || -> Result<()> {
        let mut start = 0;
        while start < config.paths {
            let end = (start + BATCH).min(config.paths);
            let batch: Vec<Result<Vec<f64>>> = (start..end).into_par_iter().map(one_path).collect();
            for sq in batch {
                for (i, v) in sq?.iter().enumerate() {
                    sum[i] += v;
                    sum_sq[i] += v * v;
                }
            }
            start = end;
        }
        Ok(())
    })??;

    let rows: Vec<RegularityRow> = pairs
        .iter()
        .enumerate()
        .map(|(i, &(group, s, t))| {
            let (modulus, se) = lp_norm_with_se(sum[i], sum_sq[i], config.paths, 2.0);
            RegularityRow {
                group,
                s_index: s,
                t_index: t,
                s: mesh.t(s),
                t: mesh.t(t),
                modulus,
                se,
            }
        })
        .collect();
    let fit = |group: &str, abscissa: fn(&RegularityRow) -> f64| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.group == group && r.modulus > 0.0)
            .map(|r| (abscissa(r).ln(), r.modulus.ln()))
            .unzip();
        (xs.len() >= 2)
            .then(|| least_squares_slope(&xs, &ys).ok())
            .flatten()
    };
    Ok(RegularityReport {
        interior_exponent: fit("interior", |r| r.t - r.s),
        origin_exponent: fit("origin", |r| r.s),
        rows,
    })
}
