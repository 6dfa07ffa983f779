//! The equation
//!
//! ```text
//! x(t) = x0 + ∫_0^t (t-s)^{-α} f(x(s)) ds + ∫_0^t (t-s)^{-β} g(x(s)) dW(s)
//! ```
//!
//! with `f: R^d -> R^d`, `g: R^d -> R^{d×m}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result, SveError};

/// Drift, diffusion and (optionally) the diffusion Jacobian.
///
/// Layouts: `diffusion` writes `g_{jk}` at `j * m + k`; `diffusion_jacobian`
/// writes `∂g_{jk}/∂x_l` at `(j * m + k) * d + l`.
pub trait Coefficients: Send + Sync {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    /// Returns `false` when the Jacobian is not available.
    fn diffusion_jacobian(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }
    fn has_diffusion_jacobian(&self) -> bool {
        false
    }
}

/// The scalar test problem
/// `f(x) = -(1-α) sin(x/2)`, `g(x) = cos(x/2)`, `x0 = 1`, `T = 1`.
#[derive(Debug, Clone, Copy)]
pub struct SineCosine {
    pub alpha: f64,
}

impl Coefficients for SineCosine {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -(1.0 - self.alpha) * (0.5 * x[0]).sin();
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = (0.5 * x[0]).cos();
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        out[0] = -0.5 * (0.5 * x[0]).sin();
        true
    }
    fn has_diffusion_jacobian(&self) -> bool {
        true
    }
}

/// Affine coefficients `f(x) = A x + a`, `g(x) = B x + b`.
///
/// `drift_matrix` is `d×d` row-major, `diffusion_tensor` holds `B_{jkl}` at
/// `(j * m + k) * d + l`, `diffusion_offset` is `d×m` row-major.
#[derive(Debug, Clone)]
pub struct Affine {
    d: usize,
    m: usize,
    drift_matrix: Vec<f64>,
    drift_offset: Vec<f64>,
    diffusion_tensor: Vec<f64>,
    diffusion_offset: Vec<f64>,
}

impl Affine {
    pub fn new(
        d: usize,
        m: usize,
        drift_matrix: Vec<f64>,
        drift_offset: Vec<f64>,
        diffusion_tensor: Vec<f64>,
        diffusion_offset: Vec<f64>,
    ) -> Result<Self> {
        let checks = [
            ("drift matrix", d * d, drift_matrix.len()),
            ("drift offset", d, drift_offset.len()),
            ("diffusion tensor", d * m * d, diffusion_tensor.len()),
            ("diffusion offset", d * m, diffusion_offset.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(SveError::DimensionMismatch {
                    what,
                    expected,
                    got,
                });
            }
        }
        if d == 0 || m == 0 {
            return Err(invalid("dimensions must be positive"));
        }
        Ok(Self {
            d,
            m,
            drift_matrix,
            drift_offset,
            diffusion_tensor,
            diffusion_offset,
        })
    }

    /// Scalar `f(x) = a1 x + a0`, `g(x) = b1 x + b0`.
    pub fn scalar(a1: f64, a0: f64, b1: f64, b0: f64) -> Self {
        Self::new(1, 1, vec![a1], vec![a0], vec![b1], vec![b0]).expect("scalar shapes")
    }
}

impl Coefficients for Affine {
    fn state_dim(&self) -> usize {
        self.d
    }
    fn noise_dim(&self) -> usize {
        self.m
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.drift_matrix[j * self.d..(j + 1) * self.d];
            *o = self.drift_offset[j] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        }
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        for (jk, o) in out.iter_mut().enumerate() {
            let row = &self.diffusion_tensor[jk * self.d..(jk + 1) * self.d];
            *o = self.diffusion_offset[jk] + row.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        }
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&self.diffusion_tensor);
        true
    }
    fn has_diffusion_jacobian(&self) -> bool {
        true
    }
}

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Coefficients from closures, for library users.
pub struct ClosureCoefficients {
    d: usize,
    m: usize,
    drift: Box<DriftFn>,
    diffusion: Box<DriftFn>,
    jacobian: Option<Box<DriftFn>>,
}

impl ClosureCoefficients {
    pub fn new<F, G>(d: usize, m: usize, drift: F, diffusion: G) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            d,
            m,
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
            jacobian: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.jacobian = Some(Box::new(jacobian));
        self
    }
}

impl Coefficients for ClosureCoefficients {
    fn state_dim(&self) -> usize {
        self.d
    }
    fn noise_dim(&self) -> usize {
        self.m
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        match &self.jacobian {
            Some(j) => {
                j(x, out);
                true
            }
            None => false,
        }
    }
    fn has_diffusion_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }
}

type SamplerFn = dyn Fn(u64) -> Vec<f64> + Send + Sync;

/// Deterministic `x0`, or a sampler keyed by the path seed.
#[derive(Clone)]
pub enum InitialState {
    Fixed(Vec<f64>),
    Random(Arc<SamplerFn>),
}

impl fmt::Debug for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Fixed(v) => f.debug_tuple("Fixed").field(v).finish(),
            InitialState::Random(_) => f.write_str("Random(..)"),
        }
    }
}

#[derive(Clone)]
pub struct SveProblem {
    alpha: f64,
    beta: f64,
    horizon: f64,
    x0: InitialState,
    coeffs: Arc<dyn Coefficients>,
}

impl fmt::Debug for SveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SveProblem")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("horizon", &self.horizon)
            .field("x0", &self.x0)
            .field("d", &self.state_dim())
            .field("m", &self.noise_dim())
            .finish()
    }
}

impl SveProblem {
    pub fn new(
        alpha: f64,
        beta: f64,
        horizon: f64,
        x0: InitialState,
        coeffs: Arc<dyn Coefficients>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if !(0.0..0.5).contains(&beta) {
            return Err(invalid(format!("beta must lie in [0,1/2), got {beta}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if coeffs.state_dim() == 0 || coeffs.noise_dim() == 0 {
            return Err(invalid("dimensions must be positive"));
        }
        if let InitialState::Fixed(v) = &x0 {
            if v.len() != coeffs.state_dim() {
                return Err(SveError::DimensionMismatch {
                    what: "initial state",
                    expected: coeffs.state_dim(),
                    got: v.len(),
                });
            }
        }
        Ok(Self {
            alpha,
            beta,
            horizon,
            x0,
            coeffs,
        })
    }

    /// The sine/cosine test problem on `[0, 1]` with `x0 = 1`.
    pub fn sine_cosine(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(
            alpha,
            beta,
            1.0,
            InitialState::Fixed(vec![1.0]),
            Arc::new(SineCosine { alpha }),
        )
    }

    /// Scalar affine problem `f = a1 x + a0`, `g = b1 x + b0`.
    #[allow(clippy::too_many_arguments)]
    pub fn scalar_affine(
        alpha: f64,
        beta: f64,
        horizon: f64,
        x0: f64,
        a1: f64,
        a0: f64,
        b1: f64,
        b0: f64,
    ) -> Result<Self> {
        Self::new(
            alpha,
            beta,
            horizon,
            InitialState::Fixed(vec![x0]),
            Arc::new(Affine::scalar(a1, a0, b1, b0)),
        )
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn state_dim(&self) -> usize {
        self.coeffs.state_dim()
    }
    pub fn noise_dim(&self) -> usize {
        self.coeffs.noise_dim()
    }
    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coeffs.as_ref()
    }

    /// `x0` for the path with the given seed.
    pub fn initial_state(&self, seed: u64) -> Result<Vec<f64>> {
        match &self.x0 {
            InitialState::Fixed(v) => Ok(v.clone()),
            InitialState::Random(s) => {
                let v = s(seed);
                if v.len() != self.state_dim() {
                    return Err(SveError::DimensionMismatch {
                        what: "sampled initial state",
                        expected: self.state_dim(),
                        got: v.len(),
                    });
                }
                Ok(v)
            }
        }
    }

    /// Same coefficients with different kernel exponents.
    pub fn with_exponents(&self, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(
            alpha,
            beta,
            self.horizon,
            self.x0.clone(),
            self.coeffs.clone(),
        )
    }
}
