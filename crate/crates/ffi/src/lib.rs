//! C interface to samlab.
//!
//! Losses are opaque `SamlabLoss` handles created by a constructor and
//! released with [`samlab_loss_free`]. Every fallible call returns a
//! [`SamlabStatus`]; on failure [`samlab_last_error`] describes the error for
//! the calling thread. Vectors are `(pointer, length)` pairs of doubles and
//! matrices are row-major `n × n` arrays. Output buffers are written only on
//! success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use samlab::losses::{self, LossSpec};
use samlab::manifold::{phi, PhiOptions};
use samlab::optim::{self, Diagnostics};
use samlab::sharpness::{ascent_sharpness, avg_sharpness, limiting_regularizers, worst_sharpness, AscentSharpness, WorstOptions};
use samlab::{eig_sym, Algorithm, Error, LossModel, OptimizerConfig, QuadraticLoss, Stepper, SymMatrix, Toy4dLoss, Vector};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    /// The ascent direction is undefined at a zero gradient.
    Undefined = 5,
    NonConvergent = 6,
    Eigengap = 7,
    Config = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamlabAlgorithm {
    Gd = 0,
    Sam = 1,
    OneSam = 2,
    AscGd = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamlabSharpness {
    Max = 0,
    Asc = 1,
    Avg = 2,
}

/// Limiting regularizers at a manifold point.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SamlabRegularizers {
    pub s_max: f64,
    pub s_asc: f64,
    pub s_avg: f64,
    pub trace_half: f64,
    pub rank: usize,
}

/// Opaque loss handle.
pub struct SamlabLoss {
    inner: Box<dyn LossModel>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SamlabStatus {
    match e {
        Error::Dimension { .. } => SamlabStatus::DimensionMismatch,
        Error::NonFinite { .. } | Error::StepFailed { .. } => SamlabStatus::NonFinite,
        Error::UndefinedAscent { .. } => SamlabStatus::Undefined,
        Error::NonConvergent { .. } | Error::EigenNoConvergence { .. } => SamlabStatus::NonConvergent,
        Error::Eigengap { .. } | Error::ZeroRank => SamlabStatus::Eigengap,
        Error::Config(_) | Error::Io(_) => SamlabStatus::Config,
        Error::InvalidArgument(_) | Error::IndexOutOfRange { .. } => SamlabStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SamlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SamlabStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SamlabStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SamlabStatus::Panic
        }
    }
}

unsafe fn loss_ref<'a>(loss: *const SamlabLoss) -> Result<&'a dyn LossModel, Fail> {
    loss.as_ref().map(|l| l.inner.as_ref()).ok_or(Fail::Null("loss"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn point(loss: &dyn LossModel, x: *const f64, n: usize) -> Result<Vector, Fail> {
    if n != loss.dim() {
        return Err(Error::Dimension { expected: loss.dim(), got: n }.into());
    }
    Ok(Vector::from(slice(x, n, "x")?.to_vec()))
}

unsafe fn store(out: *mut *mut SamlabLoss, inner: Box<dyn LossModel>) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(SamlabLoss { inner }));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn samlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn samlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `L(x) = ½ xᵀAx` for a symmetric row-major `n × n` matrix `a`.
///
/// # Safety
/// `a` must point to `n * n` doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn samlab_loss_quadratic(a: *const f64, n: usize, out: *mut *mut SamlabLoss) -> SamlabStatus {
    guard(|| {
        let a = slice(a, n * n, "a")?;
        let rows: Vec<Vec<f64>> = a.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let m = SymMatrix::from_rows(&rows)?;
        store(out, Box::new(QuadraticLoss::new(m)?))
    })
}

/// The four-dimensional toy loss.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn samlab_loss_toy4d(out: *mut *mut SamlabLoss) -> SamlabStatus {
    guard(|| store(out, Box::new(Toy4dLoss::new())))
}

/// Loss from the TOML loss-file format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn samlab_loss_from_toml(text: *const c_char, out: *mut *mut SamlabLoss) -> SamlabStatus {
    guard(|| {
        if text.is_null() {
            return Err(Fail::Null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| Error::Config("loss text is not UTF-8".into()))?;
        store(out, LossSpec::parse(text)?.build()?)
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `loss` must come from a samlab constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn samlab_loss_free(loss: *mut SamlabLoss) {
    if !loss.is_null() {
        drop(Box::from_raw(loss));
    }
}

/// Dimension of the loss, or 0 for NULL.
///
/// # Safety
/// `loss` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn samlab_loss_dim(loss: *const SamlabLoss) -> usize {
    loss.as_ref().map_or(0, |l| l.inner.dim())
}

/// Number of per-datum components, or 0 for NULL.
///
/// # Safety
/// `loss` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn samlab_loss_components(loss: *const SamlabLoss) -> usize {
    loss.as_ref().map_or(0, |l| l.inner.component_count())
}

/// Value and gradient at `x`. `grad` may be NULL.
///
/// # Safety
/// `x` and `grad` must hold `n` doubles, `value` one.
#[no_mangle]
pub unsafe extern "C" fn samlab_loss_evaluate(
    loss: *const SamlabLoss,
    x: *const f64,
    n: usize,
    value: *mut f64,
    grad: *mut f64,
) -> SamlabStatus {
    guard(|| {
        let l = loss_ref(loss)?;
        let x = point(l, x, n)?;
        if value.is_null() {
            return Err(Fail::Null("value"));
        }
        let (v, g) = losses::evaluate(l, &x)?;
        *value = v;
        if !grad.is_null() {
            slice_mut(grad, n, "grad")?.copy_from_slice(g.as_slice());
        }
        Ok(())
    })
}

/// Row-major Hessian at `x` into `out` (`n * n` doubles).
///
/// # Safety
/// `x` must hold `n` doubles and `out` `n * n`.
#[no_mangle]
pub unsafe extern "C" fn samlab_loss_hessian(loss: *const SamlabLoss, x: *const f64, n: usize, out: *mut f64) -> SamlabStatus {
    guard(|| {
        let l = loss_ref(loss)?;
        let x = point(l, x, n)?;
        let h = losses::hessian(l, &x)?;
        slice_mut(out, n * n, "out")?.copy_from_slice(h.as_slice());
        Ok(())
    })
}

fn algorithm(a: SamlabAlgorithm) -> Algorithm {
    match a {
        SamlabAlgorithm::Gd => Algorithm::Gd,
        SamlabAlgorithm::Sam => Algorithm::Sam,
        SamlabAlgorithm::OneSam => Algorithm::OneSam,
        SamlabAlgorithm::AscGd => Algorithm::AscGd,
    }
}

/// One step from `x` into `out`. `datum` selects the component for one-SAM
/// and is ignored otherwise.
///
/// # Safety
/// `x` and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn samlab_step(
    loss: *const SamlabLoss,
    alg: SamlabAlgorithm,
    eta: f64,
    rho: f64,
    datum: usize,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> SamlabStatus {
    guard(|| {
        let l = loss_ref(loss)?;
        let x = point(l, x, n)?;
        let cfg = OptimizerConfig::new(eta, rho, n)?;
        let next = match alg {
            SamlabAlgorithm::Gd => optim::gd_step(l, &x, &cfg)?,
            SamlabAlgorithm::Sam => optim::sam_step(l, &x, &cfg)?,
            SamlabAlgorithm::OneSam => optim::one_sam_step_with(l, &x, &cfg, datum)?,
            SamlabAlgorithm::AscGd => optim::asc_gd_step(l, &x, &cfg)?,
        };
        slice_mut(out, n, "out")?.copy_from_slice(next.as_slice());
        Ok(())
    })
}

/// `n_steps` steps from `x0`; the final iterate goes to `out`. One-SAM draws
/// its data from a SplitMix64 stream seeded with `seed`.
///
/// # Safety
/// `x0` and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn samlab_run(
    loss: *const SamlabLoss,
    alg: SamlabAlgorithm,
    eta: f64,
    rho: f64,
    seed: u64,
    n_steps: u64,
    x0: *const f64,
    n: usize,
    out: *mut f64,
) -> SamlabStatus {
    guard(|| {
        let l = loss_ref(loss)?;
        let x0 = point(l, x0, n)?;
        let cfg = OptimizerConfig::new(eta, rho, n)?.with_seed(seed);
        let mut stepper = Stepper::new(algorithm(alg), cfg);
        let traj = optim::run(l, &mut stepper, &x0, n_steps, n_steps.max(1), &Diagnostics::none())?;
        traj.ok()?;
        slice_mut(out, n, "out")?.copy_from_slice(traj.last().x.as_slice());
        Ok(())
    })
}

/// Eigenvalues (non-increasing) and row-major eigenvectors, one per row, of a
/// symmetric `n × n` matrix. `vectors` may be NULL.
///
/// # Safety
/// `a` and `vectors` must hold `n * n` doubles, `values` `n`.
#[no_mangle]
pub unsafe extern "C" fn samlab_eig_sym(a: *const f64, n: usize, values: *mut f64, vectors: *mut f64) -> SamlabStatus {
    guard(|| {
        let a = slice(a, n * n, "a")?;
        let rows: Vec<Vec<f64>> = a.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let e = eig_sym(&SymMatrix::from_rows(&rows)?)?;
        slice_mut(values, n, "values")?.copy_from_slice(&e.values);
        if !vectors.is_null() {
            let out = slice_mut(vectors, n * n, "vectors")?;
            for (row, v) in out.chunks_mut(n).zip(&e.vectors) {
                row.copy_from_slice(v.as_slice());
            }
        }
        Ok(())
    })
}

/// Limit point `Φ(x)` of gradient flow from `x`, with default tolerances.
///
/// # Safety
/// `x` and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn samlab_phi(loss: *const SamlabLoss, x: *const f64, n: usize, out: *mut f64) -> SamlabStatus {
    guard(|| {
        let l = loss_ref(loss)?;
        let x = point(l, x, n)?;
        let mp = phi(l, &x, &PhiOptions::default())?;
        slice_mut(out, n, "out")?.copy_from_slice(mp.p.as_slice());
        Ok(())
    })
}

/// Sharpness of the given type at radius `rho`. `n_samples` and `seed` are
/// used by the average type only; `stderr` may be NULL and is set to 0 for
/// the deterministic types. The ascent type returns `SAMLAB_STATUS_UNDEFINED`
/// at a zero gradient.
///
/// # Safety
/// `x` must hold `n` doubles; `value` and `stderr` one each.
#[no_mangle]
pub unsafe extern "C" fn samlab_sharpness(
    loss: *const SamlabLoss,
    kind: SamlabSharpness,
    x: *const f64,
    n: usize,
    rho: f64,
    n_samples: usize,
    seed: u64,
    value: *mut f64,
    stderr: *mut f64,
) -> SamlabStatus {
    guard(|| {
        let l = loss_ref(loss)?;
        let x = point(l, x, n)?;
        if value.is_null() {
            return Err(Fail::Null("value"));
        }
        let (v, se) = match kind {
            SamlabSharpness::Max => (worst_sharpness(l, &x, rho, &WorstOptions::default())?.value, 0.0),
            SamlabSharpness::Asc => match ascent_sharpness(l, &x, rho)? {
                AscentSharpness::Finite(v) => (v, 0.0),
                AscentSharpness::Undefined => {
                    let g = losses::evaluate(l, &x)?.1.norm();
                    return Err(Error::UndefinedAscent { grad_norm: g }.into());
                }
            },
            SamlabSharpness::Avg => {
                let a = avg_sharpness(l, &x, rho, n_samples, seed)?;
                (a.mean, a.stderr)
            }
        };
        *value = v;
        if !stderr.is_null() {
            *stderr = se;
        }
        Ok(())
    })
}

/// `λ₁/2`, `λ_M/2`, `Tr/(2D)` and `Tr/2` of the Hessian at `p`.
///
/// # Safety
/// `p` must hold `n` doubles and `out` one struct.
#[no_mangle]
pub unsafe extern "C" fn samlab_limiting_regularizers(
    loss: *const SamlabLoss,
    p: *const f64,
    n: usize,
    rank_tol: f64,
    out: *mut SamlabRegularizers,
) -> SamlabStatus {
    guard(|| {
        let l = loss_ref(loss)?;
        let p = point(l, p, n)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let r = limiting_regularizers(l, &p, rank_tol)?;
        *out = SamlabRegularizers { s_max: r.s_max, s_asc: r.s_asc, s_avg: r.s_avg, trace_half: r.trace_half, rank: r.rank };
        Ok(())
    })
}
