//! Brownian increments on a graded mesh, and exact coarsening onto nested
//! coarser meshes so that every scheme and the fine reference see the same
//! path.
//!
//! Increments come from a counter-based stream: the value for `(seed, step,
//! coordinate)` sits at a fixed position of a ChaCha8 keystream, so any single
//! increment can be regenerated without the others. Gaussians use the
//! inverse normal CDF, one uniform per value.
//!
//! Every increment is rounded to a fixed-point lattice (spacing
//! `2^-44 · 2^⌈log2 √T⌉`). Sums of lattice values are exact in `f64` while
//! they stay below `2^53` lattice units, so block sums are independent of
//! summation order: coarsening is exact, coarsening twice equals coarsening
//! once, and the coarse increments telescope to the same `W(T)`. The rounding
//! perturbs each increment by at most ~1e-13.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result, SveError};
use crate::mesh::GradedMesh;

const LATTICE_BITS: i32 = 44;

/// Brownian increments on some mesh: `N` rows of `m` values, row `i`
/// covering `(t_i, t_{i+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    dim: usize,
    seed: u64,
    values: Vec<f64>,
}

impl Increments {
    pub fn new(dim: usize, seed: u64, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("noise dimension must be at least 1"));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(SveError::DimensionMismatch {
                what: "increment buffer length (multiple of m)",
                expected: dim * (values.len() / dim + 1),
                got: values.len(),
            });
        }
        Ok(Self { dim, seed, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Number of rows (steps).
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    /// Increment over `(t_i, t_{i+1}]`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Block sums over `n_coarse` equal blocks of rows.
    pub fn coarsen(&self, n_coarse: usize) -> Result<Increments> {
        let n = self.len();
        if n_coarse == 0 || !n.is_multiple_of(n_coarse) {
            return Err(invalid(format!(
                "coarse step count {n_coarse} does not divide fine step count {n}"
            )));
        }
        let block = n / n_coarse;
        let m = self.dim;
        let mut values = vec![0.0; n_coarse * m];
        for j in 0..n_coarse {
            for c in 0..m {
                let mut acc = 0.0;
                for k in j * block..(j + 1) * block {
                    acc += self.values[k * m + c];
                }
                values[j * m + c] = acc;
            }
        }
        Ok(Increments {
            dim: m,
            seed: self.seed,
            values,
        })
    }

    /// Componentwise sum of all rows, i.e. `W(T) - W(0)`.
    pub fn total(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for row in self.values.chunks(self.dim) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        acc
    }
}

/// One `m`-dimensional Brownian path sampled on a fine graded mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    mesh: GradedMesh,
    increments: Increments,
}

impl BrownianPath {
    pub fn mesh(&self) -> &GradedMesh {
        &self.mesh
    }
    pub fn increments(&self) -> &Increments {
        &self.increments
    }
    pub fn dim(&self) -> usize {
        self.increments.dim
    }
    pub fn seed(&self) -> u64 {
        self.increments.seed
    }

    /// Increments on the nested mesh with `n_coarse` steps.
    pub fn coarsen(&self, n_coarse: usize) -> Result<Increments> {
        self.increments.coarsen(n_coarse)
    }

    /// This path seen on the nested mesh with `n_coarse` steps.
    pub fn coarsened(&self, n_coarse: usize) -> Result<BrownianPath> {
        Ok(BrownianPath {
            mesh: self.coarse_mesh(n_coarse)?,
            increments: self.coarsen(n_coarse)?,
        })
    }

    /// The nested mesh with `n_coarse` steps.
    pub fn coarse_mesh(&self, n_coarse: usize) -> Result<GradedMesh> {
        if n_coarse == 0 || !self.mesh.len().is_multiple_of(n_coarse) {
            return Err(invalid(format!(
                "coarse step count {n_coarse} does not divide fine step count {}",
                self.mesh.len()
            )));
        }
        GradedMesh::new(self.mesh.horizon(), n_coarse, self.mesh.grading())
    }
}

/// Sample independent increments `ΔW_i ~ N(0, h_i I_m)` on `mesh`.
pub fn sample_path(mesh: &GradedMesh, m: usize, seed: u64) -> Result<BrownianPath> {
    if m == 0 {
        return Err(invalid("noise dimension must be at least 1"));
    }
    let mut gen = GaussianStream::new(seed);
    let quantum = lattice_quantum(mesh.horizon());
    let mut values = Vec::with_capacity(mesh.len() * m);
    for &h in mesh.steps() {
        let sd = h.sqrt();
        for _ in 0..m {
            values.push(to_lattice(gen.next_standard() * sd, quantum));
        }
    }
    Ok(BrownianPath {
        mesh: mesh.clone(),
        increments: Increments {
            dim: m,
            seed,
            values,
        },
    })
}

/// The increment at `(step, coord)` of the path `sample_path(mesh, m, seed)`,
/// regenerated from its counter position alone.
pub fn increment_at(mesh: &GradedMesh, m: usize, seed: u64, step: usize, coord: usize) -> f64 {
    let mut gen = GaussianStream::new(seed);
    gen.seek((step * m + coord) as u128);
    to_lattice(
        gen.next_standard() * mesh.steps()[step].sqrt(),
        lattice_quantum(mesh.horizon()),
    )
}

/// Seed for path `index` of a Monte Carlo run (SplitMix64 finaliser).
pub fn path_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice_quantum(horizon: f64) -> f64 {
    let e = (0.5 * horizon.log2()).ceil().max(0.0) as i32;
    2f64.powi(e - LATTICE_BITS)
}

#[inline]
fn to_lattice(x: f64, quantum: f64) -> f64 {
    (x / quantum).round() * quantum
}

struct GaussianStream {
    rng: ChaCha8Rng,
    normal: Normal,
}

impl GaussianStream {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, 1.0).expect("standard normal"),
        }
    }

    /// Position the stream at value `index` (two 32-bit words per value).
    fn seek(&mut self, index: u128) {
        self.rng.set_word_pos(2 * index);
    }

    fn next_standard(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        let u = (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        self.normal.inverse_cdf(u)
    }
}
