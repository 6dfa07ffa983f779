//! C ABI over `sve-core`.
//!
//! Objects are opaque handles created by `sve_*_new`/`sve_*_build`/
//! `sve_*_sample` functions and released with the matching `sve_*_free`.
//! Every fallible call returns an [`SveStatus`]; on failure a description is
//! available from [`sve_last_error_message`] on the same thread. Output
//! arrays are caller-allocated; their capacity is passed alongside and
//! checked.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sve_core::{
    build_soe, em_solve, fast_em_solve, milstein_solve, path_seed, sample_path, BrownianPath,
    GradedMesh, MilsteinMode, SveError, Trajectory,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SveStatus {
    Ok = 0,
    /// Parameters outside their domain, mismatched dimensions or meshes.
    InvalidArgument = 1,
    /// Non-finite states or non-convergent quadrature.
    NumericalFailure = 2,
    /// The requested exponential-sum tolerance could not be certified.
    SoeFailure = 3,
    NullPointer = 4,
    /// An output array is smaller than required.
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Graded mesh `t_n = T (n/N)^r`.
pub struct SveMesh(GradedMesh);

/// Certified sum-of-exponentials approximation of `t^{-γ}`.
pub struct SveSoe(sve_core::SoeApprox);

/// Equation coefficients with kernel exponents.
pub struct SveProblem(sve_core::SveProblem);

/// Brownian increments on a mesh.
pub struct SvePath(BrownianPath);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &SveError) -> SveStatus {
    match err.exit_code() {
        1 => SveStatus::InvalidArgument,
        3 => SveStatus::SoeFailure,
        _ => SveStatus::NumericalFailure,
    }
}

/// Internal failure carrying the status to return.
struct Failure(SveStatus, String);

impl From<SveError> for Failure {
    fn from(e: SveError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SveStatus::NullPointer, format!("{what} is null"))
}

/// Run `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SveStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SveStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside sve".into());
            SveStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn fill(out: *mut f64, capacity: usize, values: &[f64]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if capacity < values.len() {
        return Err(Failure(
            SveStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Message for the last failed call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sve_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Seed of Monte Carlo path `index` derived from a master seed.
#[no_mangle]
pub extern "C" fn sve_path_seed(master: u64, index: u64) -> u64 {
    path_seed(master, index)
}

// ---------------------------------------------------------------- mesh

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sve_mesh_new(
    horizon: f64,
    n: usize,
    r: f64,
    out: *mut *mut SveMesh,
) -> SveStatus {
    guard(|| store(out, SveMesh(GradedMesh::new(horizon, n, r)?)))
}

/// # Safety
/// `mesh` must be null or a handle from [`sve_mesh_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sve_mesh_free(mesh: *mut SveMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of steps `N` (0 for a null handle).
///
/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn sve_mesh_len(mesh: *const SveMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.len())
}

/// Copy the `N + 1` nodes into `out`.
///
/// # Safety
/// `mesh` must be a live mesh handle; `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sve_mesh_points(
    mesh: *const SveMesh,
    out: *mut f64,
    capacity: usize,
) -> SveStatus {
    guard(|| fill(out, capacity, deref(mesh, "mesh")?.0.points()))
}

/// `∫_{t_i}^{t_{i+1}} (t_n - s)^{-α} ds`.
///
/// # Safety
/// `mesh` must be a live mesh handle; `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn sve_mesh_drift_weight(
    mesh: *const SveMesh,
    n: usize,
    i: usize,
    alpha: f64,
    out: *mut f64,
) -> SveStatus {
    guard(|| {
        let w = deref(mesh, "mesh")?.0.drift_weight(n, i, alpha)?;
        fill(out, 1, &[w])
    })
}

// ---------------------------------------------------------------- soe

/// Build `t^{-γ} ≈ Σ ω_k e^{-τ_k t}` on `[δ, T]` with relative error `ε`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sve_soe_build(
    gamma: f64,
    delta: f64,
    horizon: f64,
    eps: f64,
    out: *mut *mut SveSoe,
) -> SveStatus {
    guard(|| store(out, SveSoe(build_soe(gamma, delta, horizon, eps)?)))
}

/// # Safety
/// `soe` must be null or a handle from [`sve_soe_build`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sve_soe_free(soe: *mut SveSoe) {
    if !soe.is_null() {
        drop(Box::from_raw(soe));
    }
}

/// Number of exponentials (0 for a null handle).
///
/// # Safety
/// `soe` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sve_soe_len(soe: *const SveSoe) -> usize {
    soe.as_ref().map_or(0, |s| s.0.len())
}

/// Copy rates and weights, each of length [`sve_soe_len`].
///
/// # Safety
/// `soe` must be a live handle; `rates` and `weights` must each point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sve_soe_terms(
    soe: *const SveSoe,
    rates: *mut f64,
    weights: *mut f64,
    capacity: usize,
) -> SveStatus {
    guard(|| {
        let s = &deref(soe, "soe")?.0;
        fill(rates, capacity, s.rates())?;
        fill(weights, capacity, s.weights())
    })
}

/// Evaluate the expansion at `t` (NaN for a null handle).
///
/// # Safety
/// `soe` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sve_soe_eval(soe: *const SveSoe, t: f64) -> f64 {
    soe.as_ref().map_or(f64::NAN, |s| s.0.eval(t))
}

/// Maximum relative error on `grid` log-spaced points of `[δ, T]`.
///
/// # Safety
/// `soe` must be a live handle; `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn sve_soe_verify(
    soe: *const SveSoe,
    grid: usize,
    out: *mut f64,
) -> SveStatus {
    guard(|| {
        if grid < 2 {
            return Err(Failure(
                SveStatus::InvalidArgument,
                "grid needs at least 2 points".into(),
            ));
        }
        let err = deref(soe, "soe")?.0.verify(grid);
        fill(out, 1, &[err])
    })
}

// ---------------------------------------------------------------- problems

/// `f = -(1-α) sin(x/2)`, `g = cos(x/2)`, `x0 = 1`, `T = 1`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sve_problem_sine_cosine(
    alpha: f64,
    beta: f64,
    out: *mut *mut SveProblem,
) -> SveStatus {
    guard(|| {
        store(
            out,
            SveProblem(sve_core::SveProblem::sine_cosine(alpha, beta)?),
        )
    })
}

/// Scalar `f = a1 x + a0`, `g = b1 x + b0`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sve_problem_affine(
    alpha: f64,
    beta: f64,
    horizon: f64,
    x0: f64,
    a1: f64,
    a0: f64,
    b1: f64,
    b0: f64,
    out: *mut *mut SveProblem,
) -> SveStatus {
    guard(|| {
        let p = sve_core::SveProblem::scalar_affine(alpha, beta, horizon, x0, a1, a0, b1, b0)?;
        store(out, SveProblem(p))
    })
}

/// # Safety
/// `problem` must be null or a problem handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sve_problem_free(problem: *mut SveProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

// ---------------------------------------------------------------- paths

/// Sample `m`-dimensional Brownian increments on `mesh`.
///
/// # Safety
/// `mesh` must be a live mesh handle; `out` must be valid for one handle.
#[no_mangle]
pub unsafe extern "C" fn sve_path_sample(
    mesh: *const SveMesh,
    m: usize,
    seed: u64,
    out: *mut *mut SvePath,
) -> SveStatus {
    guard(|| store(out, SvePath(sample_path(&deref(mesh, "mesh")?.0, m, seed)?)))
}

/// The same path on the nested mesh with `n_coarse` steps (exact block sums).
///
/// # Safety
/// `path` must be a live path handle; `out` must be valid for one handle.
#[no_mangle]
pub unsafe extern "C" fn sve_path_coarsen(
    path: *const SvePath,
    n_coarse: usize,
    out: *mut *mut SvePath,
) -> SveStatus {
    guard(|| store(out, SvePath(deref(path, "path")?.0.coarsened(n_coarse)?)))
}

/// # Safety
/// `path` must be null or a path handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sve_path_free(path: *mut SvePath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Copy the `N × m` increments (row-major by step).
///
/// # Safety
/// `path` must be a live path handle; `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sve_path_increments(
    path: *const SvePath,
    out: *mut f64,
    capacity: usize,
) -> SveStatus {
    guard(|| {
        fill(
            out,
            capacity,
            deref(path, "path")?.0.increments().as_slice(),
        )
    })
}

// ---------------------------------------------------------------- solvers

unsafe fn solve(
    problem: *const SveProblem,
    path: *const SvePath,
    out: *mut f64,
    capacity: usize,
    run: impl FnOnce(&sve_core::SveProblem, &BrownianPath) -> sve_core::Result<Trajectory>,
) -> SveStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let w = &deref(path, "path")?.0;
        let traj = run(p, w)?;
        fill(out, capacity, traj.states())
    })
}

/// Euler–Maruyama on the path's mesh; writes `(N + 1) × d` states.
///
/// # Safety
/// Handles must be live; `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sve_em_solve(
    problem: *const SveProblem,
    path: *const SvePath,
    out: *mut f64,
    capacity: usize,
) -> SveStatus {
    solve(problem, path, out, capacity, |p, w| {
        em_solve(p, w.mesh(), w.increments())
    })
}

/// Fast Euler–Maruyama with expansion tolerance `eps`.
///
/// # Safety
/// Handles must be live; `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sve_fast_em_solve(
    problem: *const SveProblem,
    path: *const SvePath,
    eps: f64,
    out: *mut f64,
    capacity: usize,
) -> SveStatus {
    solve(problem, path, out, capacity, |p, w| {
        fast_em_solve(p, w.mesh(), w.increments(), eps)
    })
}

/// Milstein with the closed-form iterated integral (`β = 0`, scalar noise).
///
/// # Safety
/// Handles must be live; `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sve_milstein_solve(
    problem: *const SveProblem,
    path: *const SvePath,
    out: *mut f64,
    capacity: usize,
) -> SveStatus {
    solve(problem, path, out, capacity, |p, w| {
        milstein_solve(p, w.mesh(), w.increments(), MilsteinMode::Exact)
    })
}

/// Milstein with stochastic integrals resolved on `fine`, a refinement of
/// `path` whose block sums equal `path`'s increments.
///
/// # Safety
/// Handles must be live; `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sve_milstein_solve_subsampled(
    problem: *const SveProblem,
    path: *const SvePath,
    fine: *const SvePath,
    out: *mut f64,
    capacity: usize,
) -> SveStatus {
    guard(|| {
        let fine = &deref(fine, "fine path")?.0;
        match solve(problem, path, out, capacity, |p, w| {
            milstein_solve(p, w.mesh(), w.increments(), MilsteinMode::Subsampled(fine))
        }) {
            SveStatus::Ok => Ok(()),
            status => Err(Failure(
                status,
                LAST_ERROR.with(|e| e.borrow().to_string_lossy().into_owned()),
            )),
        }
    })
}
