//! C ABI for `symflow`.
//!
//! Conventions:
//! * every fallible function returns a [`SymflowStatus`]; on failure a
//!   message is available from [`symflow_last_error`] on the same thread,
//! * matrices are row-major `double` arrays,
//! * objects are opaque handles created by `*_new`/`symflow_simulate` and
//!   released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use symflow::analysis::seeded_det_sweep;
use symflow::dynamics::{run_simulation, seeded_model, BackProjection, SimConfig, TraceRow};
use symflow::linalg::Matrix;
use symflow::metrics;
use symflow::model::{CovarianceModel, EigenvaluePreset};
use symflow::rules::{rule_rhs, RuleKind, RuleSpec};
use symflow::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymflowStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    InvalidArgument = 3,
    /// Non-finite estimate or singular Gram matrix during integration.
    Divergence = 4,
    /// Singular matrix, failed eigensolver or asymmetric input.
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymflowRule {
    Twj2s = 0,
    N2s = 1,
    M2s = 2,
    Oja = 3,
    Nl = 4,
    Nse = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymflowPreset {
    Spaced = 0,
    Nearby = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymflowBackProjection {
    Exact = 0,
    Approximated = 1,
    None = 2,
}

/// One sampled row of a trace.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymflowTraceRow {
    pub step: u64,
    pub e_o: f64,
    pub e_p: f64,
}

/// Covariance model with a known spectrum.
pub struct SymflowModel(CovarianceModel);

/// Error trace of one simulation.
pub struct SymflowTrace(Vec<TraceRow>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SymflowStatus {
    match e {
        Error::Dimension(_) => SymflowStatus::Dimension,
        Error::InvalidArgument(_) | Error::Config(_) | Error::Io(_) => SymflowStatus::InvalidArgument,
        Error::Divergence { .. } => SymflowStatus::Divergence,
        Error::NotSymmetric(_) | Error::NoConvergence { .. } | Error::Singular(_) => {
            SymflowStatus::Numerical
        }
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, records any error message and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SymflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SymflowStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            SymflowStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            SymflowStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<*const T, Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(p)
    }
}

/// Reads a `rows×cols` row-major matrix.
///
/// # Safety
/// `p` must point to `rows * cols` readable doubles.
unsafe fn read_matrix(p: *const f64, rows: usize, cols: usize, what: &'static str) -> Result<Matrix, Failure> {
    let p = non_null(p, what)?;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure::Lib(Error::Dimension(format!("{rows}x{cols} overflows"))))?;
    Ok(Matrix::from_vec(rows, cols, slice::from_raw_parts(p, len).to_vec())?)
}

/// # Safety
/// `out` must point to `m.rows() * m.cols()` writable doubles.
unsafe fn write_matrix(m: &Matrix, out: *mut f64, what: &'static str) -> Result<(), Failure> {
    let out = non_null(out, what)? as *mut f64;
    ptr::copy_nonoverlapping(m.as_slice().as_ptr(), out, m.as_slice().len());
    Ok(())
}

fn rule_spec(rule: SymflowRule, alpha: f64, m: usize) -> RuleSpec {
    let kind = match rule {
        SymflowRule::Twj2s => RuleKind::TwJ2S,
        SymflowRule::N2s => RuleKind::N2S,
        SymflowRule::M2s => RuleKind::M2S,
        SymflowRule::Oja => RuleKind::Oja,
        SymflowRule::Nl => RuleKind::NL,
        SymflowRule::Nse => RuleKind::NSE,
    };
    RuleSpec::from_kind(kind, alpha, m)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn symflow_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn symflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Model with a preset spectrum and an eigenbasis drawn from `seed`
/// (the same draw as `symflow run --seed`).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn symflow_model_new_preset(
    preset: SymflowPreset,
    seed: u64,
    out: *mut *mut SymflowModel,
) -> SymflowStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = match preset {
            SymflowPreset::Spaced => EigenvaluePreset::Spaced,
            SymflowPreset::Nearby => EigenvaluePreset::Nearby,
        };
        let model = seeded_model(&p.values(), seed)?;
        *out = Box::into_raw(Box::new(SymflowModel(model)));
        Ok(())
    })
}

/// Model with `n` strictly decreasing positive eigenvalues.
///
/// # Safety
/// `lambdas` must point to `n` doubles and `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn symflow_model_new_custom(
    lambdas: *const f64,
    n: usize,
    seed: u64,
    out: *mut *mut SymflowModel,
) -> SymflowStatus {
    guard(|| {
        non_null(out, "out")?;
        let lambdas = slice::from_raw_parts(non_null(lambdas, "lambdas")?, n);
        let model = seeded_model(lambdas, seed)?;
        *out = Box::into_raw(Box::new(SymflowModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from a `symflow_model_new_*` call and not be freed
/// already; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn symflow_model_free(model: *mut SymflowModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension `n` of the model, 0 for NULL.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn symflow_model_dim(model: *const SymflowModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// Copies the `n×n` covariance matrix into `out`.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `n*n` doubles.
#[no_mangle]
pub unsafe extern "C" fn symflow_model_covariance(model: *const SymflowModel, out: *mut f64) -> SymflowStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        write_matrix(model.0.covariance(), out, "out")
    })
}

/// Integrates `rule` on `model` from the seeded starting point and returns
/// the sampled trace. `alpha` is used by M2S only.
///
/// # Safety
/// `model` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn symflow_simulate(
    model: *const SymflowModel,
    rule: SymflowRule,
    alpha: f64,
    m: usize,
    backprojection: SymflowBackProjection,
    gamma: f64,
    steps: u64,
    subsample: u64,
    seed: u64,
    out: *mut *mut SymflowTrace,
) -> SymflowStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        non_null(out, "out")?;
        let config = SimConfig {
            model: model.0.clone(),
            spec: rule_spec(rule, alpha, m),
            m,
            gamma,
            steps: usize::try_from(steps)
                .map_err(|_| Error::InvalidArgument("steps too large".into()))?,
            subsample: usize::try_from(subsample)
                .map_err(|_| Error::InvalidArgument("subsample too large".into()))?,
            backprojection: match backprojection {
                SymflowBackProjection::Exact => BackProjection::Exact,
                SymflowBackProjection::Approximated => BackProjection::Approximated,
                SymflowBackProjection::None => BackProjection::None,
            },
            seed,
        };
        let trace = run_simulation(&config)?;
        *out = Box::into_raw(Box::new(SymflowTrace(trace)));
        Ok(())
    })
}

/// Number of rows, 0 for NULL.
///
/// # Safety
/// `trace` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn symflow_trace_len(trace: *const SymflowTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `trace` must be a live handle and `out` a valid row pointer.
#[no_mangle]
pub unsafe extern "C" fn symflow_trace_row(
    trace: *const SymflowTrace,
    index: usize,
    out: *mut SymflowTraceRow,
) -> SymflowStatus {
    guard(|| {
        let trace = &*non_null(trace, "trace")?;
        non_null(out, "out")?;
        let row = trace.0.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!("row {index} out of range (len {})", trace.0.len()))
        })?;
        *out = SymflowTraceRow {
            step: row.step as u64,
            e_o: row.e_o,
            e_p: row.e_p,
        };
        Ok(())
    })
}

/// # Safety
/// `trace` must come from [`symflow_simulate`] and not be freed already;
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn symflow_trace_free(trace: *mut SymflowTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Right-hand side of `rule` at `W` (`n×m`) for covariance `C` (`n×n`),
/// written to `out` (`n×m`).
///
/// # Safety
/// `w`, `c` and `out` must hold `n*m`, `n*n` and `n*m` doubles.
#[no_mangle]
pub unsafe extern "C" fn symflow_rule_rhs(
    rule: SymflowRule,
    alpha: f64,
    w: *const f64,
    n: usize,
    m: usize,
    c: *const f64,
    out: *mut f64,
) -> SymflowStatus {
    guard(|| {
        let w = read_matrix(w, n, m, "w")?;
        let c = read_matrix(c, n, n, "c")?;
        let spec = rule_spec(rule, alpha, m);
        spec.validate(m)?;
        write_matrix(&rule_rhs(&spec, &w, &c)?, out, "out")
    })
}

type Measure = fn(&Matrix) -> symflow::Result<f64>;

unsafe fn measure(f: Measure, x: *const f64, m: usize, out: *mut f64) -> SymflowStatus {
    guard(|| {
        let x = read_matrix(x, m, m, "x")?;
        let out = non_null(out, "out")? as *mut f64;
        *out = f(&x)?;
        Ok(())
    })
}

/// `e₁` of the `m×m` matrix `x`.
///
/// # Safety
/// `x` must hold `m*m` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn symflow_e1(x: *const f64, m: usize, out: *mut f64) -> SymflowStatus {
    measure(metrics::e1, x, m, out)
}

/// `e₂` of the `m×m` matrix `x`.
///
/// # Safety
/// As for [`symflow_e1`].
#[no_mangle]
pub unsafe extern "C" fn symflow_e2(x: *const f64, m: usize, out: *mut f64) -> SymflowStatus {
    measure(metrics::e2, x, m, out)
}

/// `e₂′` of the `m×m` matrix `x`.
///
/// # Safety
/// As for [`symflow_e1`].
#[no_mangle]
pub unsafe extern "C" fn symflow_e2_prime(x: *const f64, m: usize, out: *mut f64) -> SymflowStatus {
    measure(metrics::e2_prime, x, m, out)
}

/// Number of grid points of [`symflow_det_sweep`].
pub const SYMFLOW_DET_SWEEP_LEN: usize = 201;

/// `det{D′_α}` for α = 0.0, 0.1, …, 20.0 with a random `10×m` `Ā` drawn
/// from `seed`. Writes 201 determinants to `dets` and the number of sign
/// changes to `crossings` (may be NULL).
///
/// # Safety
/// `dets` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn symflow_det_sweep(
    seed: u64,
    m: usize,
    dets: *mut f64,
    len: usize,
    crossings: *mut usize,
) -> SymflowStatus {
    guard(|| {
        let dets = non_null(dets, "dets")? as *mut f64;
        if len < SYMFLOW_DET_SWEEP_LEN {
            return Err(Error::Dimension(format!(
                "need room for {SYMFLOW_DET_SWEEP_LEN} values, got {len}"
            ))
            .into());
        }
        let sweep = seeded_det_sweep(seed, m)?;
        ptr::copy_nonoverlapping(sweep.dets.as_ptr(), dets, sweep.dets.len());
        if !crossings.is_null() {
            *crossings = sweep.zero_crossings.len();
        }
        Ok(())
    })
}
