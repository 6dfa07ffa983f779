//! Time-stepping schemes: Euler–Maruyama, fast (sum-of-exponentials)
//! Euler–Maruyama and Milstein, all on graded meshes.

pub(crate) mod em;
pub(crate) mod fast_em;
pub(crate) mod milstein;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

pub use em::{em_solve, em_solve_with, EmWeights};
pub use fast_em::{fast_em_solve, fast_em_solve_with, FastEmPlan};
pub use milstein::{milstein_solve, milstein_solve_with, MilsteinMode};

pub use crate::quadrature::quadrature_oracle;

use crate::error::{invalid, Result, SveError};
use crate::mesh::GradedMesh;
use crate::noise::Increments;
use crate::problem::SveProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Em,
    FastEm,
    Milstein,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Em => "em",
            SchemeKind::FastEm => "fast-em",
            SchemeKind::Milstein => "milstein",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = SveError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(SchemeKind::Em),
            "fast-em" | "fast_em" => Ok(SchemeKind::FastEm),
            "milstein" => Ok(SchemeKind::Milstein),
            other => Err(invalid(format!("unknown scheme `{other}`"))),
        }
    }
}

/// States `X_0 ..= X_N` of one solve.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mesh: GradedMesh,
    pub scheme: SchemeKind,
    pub wall_time: Duration,
    dim: usize,
    states: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn new(
        mesh: GradedMesh,
        scheme: SchemeKind,
        dim: usize,
        states: Vec<f64>,
        wall_time: Duration,
    ) -> Self {
        debug_assert_eq!(states.len(), (mesh.len() + 1) * dim);
        Self {
            mesh,
            scheme,
            wall_time,
            dim,
            states,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Number of stored states, `N + 1`.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n * self.dim..(n + 1) * self.dim]
    }
    /// Flat `(N + 1) × d` buffer.
    pub fn states(&self) -> &[f64] {
        &self.states
    }
}

fn check_inputs(problem: &SveProblem, mesh: &GradedMesh, increments: &Increments) -> Result<()> {
    if increments.dim() != problem.noise_dim() {
        return Err(SveError::DimensionMismatch {
            what: "noise dimension",
            expected: problem.noise_dim(),
            got: increments.dim(),
        });
    }
    if increments.len() != mesh.len() {
        return Err(SveError::DimensionMismatch {
            what: "increment rows vs mesh steps",
            expected: mesh.len(),
            got: increments.len(),
        });
    }
    if mesh.horizon() != problem.horizon() {
        return Err(invalid(format!(
            "mesh horizon {} differs from problem horizon {}",
            mesh.horizon(),
            problem.horizon()
        )));
    }
    Ok(())
}

#[inline]
fn ensure_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SveError::NonFinite { step })
    }
}

/// `out += G · dw` for `G` stored `d×m` row-major.
#[inline]
fn mat_vec_acc(g: &[f64], dw: &[f64], out: &mut [f64]) {
    let m = dw.len();
    for (j, o) in out.iter_mut().enumerate() {
        let row = &g[j * m..(j + 1) * m];
        *o += row.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>();
    }
}
