//! C ABI for the `bsdp` solver.
//!
//! Problems and results are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`BsdpStatus`]; on failure the message is available from
//! [`bsdp_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bsdp::io::{self, SdpaSign};
use bsdp::model::ProblemData;
use bsdp::params::SolverParams;
use bsdp::problems;
use bsdp::residuals::StopDecision;
use bsdp::solver::{solve, SolveResult};

/// Return code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsdpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Solve = 4,
    /// Caller buffer is shorter than the requested data.
    BufferTooSmall = 5,
    Panic = 6,
}

/// Why a solve stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsdpTermination {
    Converged = 0,
    MaxIter = 1,
    MaxTime = 2,
    Stagnation = 3,
}

/// Solver options exposed over the ABI. Initialize with
/// [`bsdp_params_default`] and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsdpParams {
    pub tol: f64,
    pub maxiter: usize,
    /// Wall-clock limit in seconds.
    pub maxtime: f64,
    /// Tolerance at which the first phase hands over.
    pub tol_adm: f64,
    /// 0 silences all output.
    pub printlevel: c_int,
    /// 1 enables the stagnation exit.
    pub stopoption: c_int,
    /// Nonzero stops after the first phase.
    pub phase1_only: c_int,
}

/// Opaque problem handle.
pub struct BsdpProblem {
    data: ProblemData,
    /// Maps the standard-form objective to the generator's source objective.
    objective_scale: Option<f64>,
}

/// Opaque result handle.
pub struct BsdpResult {
    data: ProblemData,
    objective: Option<f64>,
    res: SolveResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("interior NULs removed")));
}

fn fail(status: BsdpStatus, msg: impl Into<String>) -> BsdpStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting a panic into [`BsdpStatus::Panic`].
fn guard(f: impl FnOnce() -> BsdpStatus) -> BsdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(BsdpStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, BsdpStatus> {
    if p.is_null() {
        return Err(fail(BsdpStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(BsdpStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, BsdpStatus> {
    p.as_ref().ok_or_else(|| fail(BsdpStatus::NullArgument, format!("{name} is NULL")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, BsdpStatus> {
    p.as_mut().ok_or_else(|| fail(BsdpStatus::NullArgument, format!("{name} is NULL")))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

fn to_params(p: &BsdpParams) -> SolverParams {
    SolverParams {
        tol: p.tol,
        maxiter: p.maxiter,
        maxtime: p.maxtime,
        tol_adm: p.tol_adm,
        printlevel: p.printlevel.clamp(0, u8::MAX as c_int) as u8,
        stopoption: p.stopoption.clamp(0, u8::MAX as c_int) as u8,
        phase1_only: p.phase1_only != 0,
        ..SolverParams::default()
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bsdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn bsdp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Fills `out` with the default options.
///
/// # Safety
/// `out` must be NULL or point to writable memory for a `BsdpParams`.
#[no_mangle]
pub unsafe extern "C" fn bsdp_params_default(out: *mut BsdpParams) -> BsdpStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        let d = SolverParams::default();
        *out = BsdpParams {
            tol: d.tol,
            maxiter: d.maxiter,
            maxtime: d.maxtime,
            tol_adm: d.tol_adm,
            printlevel: d.printlevel as c_int,
            stopoption: d.stopoption as c_int,
            phase1_only: d.phase1_only as c_int,
        };
        BsdpStatus::Ok
    })
}

fn store_problem(out: &mut *mut BsdpProblem, p: BsdpProblem) -> BsdpStatus {
    *out = Box::into_raw(Box::new(p));
    BsdpStatus::Ok
}

/// Reads an SDPA sparse file. With `keep_sign` zero the SDPA maximization
/// is converted to minimization; nonzero keeps `C = F0`.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_problem_read_sdpa(path: *const c_char, keep_sign: c_int, out: *mut *mut BsdpProblem) -> BsdpStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        *out = ptr::null_mut();
        let path = try_ffi!(str_arg(path, "path"));
        let sign = if keep_sign != 0 { SdpaSign::Max } else { SdpaSign::Min };
        match io::read_sdpa(Path::new(path), sign) {
            Ok(data) => store_problem(out, BsdpProblem { data, objective_scale: None }),
            Err(e) => fail(BsdpStatus::Io, e.to_string()),
        }
    })
}

/// Reads a problem in the JSON exchange format.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_problem_read_json(path: *const c_char, out: *mut *mut BsdpProblem) -> BsdpStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        *out = ptr::null_mut();
        let path = try_ffi!(str_arg(path, "path"));
        match io::read_json(Path::new(path)) {
            Ok(data) => store_problem(out, BsdpProblem { data, objective_scale: None }),
            Err(e) => fail(BsdpStatus::Io, e.to_string()),
        }
    })
}

/// Builds a problem from a generator spec such as `theta:cycle,5`.
///
/// # Safety
/// `spec` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_problem_generate(spec: *const c_char, out: *mut *mut BsdpProblem) -> BsdpStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        *out = ptr::null_mut();
        let spec = try_ffi!(str_arg(spec, "spec"));
        match problems::generate(spec) {
            Ok(inst) => {
                let scale = inst.sense.sign() * inst.obj_scale;
                store_problem(out, BsdpProblem { data: inst.data, objective_scale: Some(scale) })
            }
            Err(e) => fail(BsdpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Writes the problem in the JSON exchange format.
///
/// # Safety
/// `problem` must be NULL or a live handle; `path` must be NULL or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bsdp_problem_write_json(problem: *const BsdpProblem, path: *const c_char) -> BsdpStatus {
    guard(|| {
        let p = try_ffi!(ref_arg(problem, "problem"));
        let path = try_ffi!(str_arg(path, "path"));
        match io::write_json(&p.data, Path::new(path)) {
            Ok(()) => BsdpStatus::Ok,
            Err(e) => fail(BsdpStatus::Io, e.to_string()),
        }
    })
}

/// Sizes of the problem: equality rows `m`, inequality rows `p`, number of
/// blocks and total vector dimension. Any output pointer may be NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_problem_dims(
    problem: *const BsdpProblem,
    m: *mut usize,
    p: *mut usize,
    nblocks: *mut usize,
    dim: *mut usize,
) -> BsdpStatus {
    guard(|| {
        let pr = try_ffi!(ref_arg(problem, "problem"));
        let d = &pr.data;
        for (ptr, v) in [(m, d.m()), (p, d.p()), (nblocks, d.blk.len()), (dim, d.blk.dim())] {
            if let Some(o) = ptr.as_mut() {
                *o = v;
            }
        }
        BsdpStatus::Ok
    })
}

/// Releases a problem handle. NULL is ignored.
///
/// # Safety
/// `problem` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bsdp_problem_free(problem: *mut BsdpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves `problem`. `params` may be NULL for the defaults. A solve that
/// stops on an iteration or time limit still returns `BSDP_STATUS_OK`; the
/// reason is reported by [`bsdp_result_termination`].
///
/// # Safety
/// `problem` must be NULL or a live handle; `params` must be NULL or valid;
/// `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_solve(problem: *const BsdpProblem, params: *const BsdpParams, out: *mut *mut BsdpResult) -> BsdpStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        *out = ptr::null_mut();
        let pr = try_ffi!(ref_arg(problem, "problem"));
        let sp = match params.as_ref() {
            Some(p) => to_params(p),
            None => SolverParams { printlevel: 0, ..SolverParams::default() },
        };
        if let Err(e) = sp.validate() {
            return fail(BsdpStatus::InvalidArgument, e.to_string());
        }
        match solve(&pr.data, &sp, None) {
            Ok(res) => {
                let objective = pr.objective_scale.map(|scale| scale * res.pobj);
                *out = Box::into_raw(Box::new(BsdpResult { data: pr.data.clone(), objective, res }));
                BsdpStatus::Ok
            }
            Err(e) => fail(BsdpStatus::Solve, e.to_string()),
        }
    })
}

/// Primal and dual objective values of the standard form. Either output may be NULL.
///
/// # Safety
/// `result` must be NULL or a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_result_objectives(result: *const BsdpResult, pobj: *mut f64, dobj: *mut f64) -> BsdpStatus {
    guard(|| {
        let r = try_ffi!(ref_arg(result, "result"));
        if let Some(o) = pobj.as_mut() {
            *o = r.res.pobj;
        }
        if let Some(o) = dobj.as_mut() {
            *o = r.res.dobj;
        }
        BsdpStatus::Ok
    })
}

/// Objective in the source sense and scale of a generated problem. Fails
/// with `BSDP_STATUS_INVALID_ARGUMENT` for problems read from files.
///
/// # Safety
/// `result` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_result_source_objective(result: *const BsdpResult, out: *mut f64) -> BsdpStatus {
    guard(|| {
        let r = try_ffi!(ref_arg(result, "result"));
        let out = try_ffi!(out_arg(out, "out"));
        match r.objective {
            Some(v) => {
                *out = v;
                BsdpStatus::Ok
            }
            None => fail(BsdpStatus::InvalidArgument, "problem was not generated"),
        }
    })
}

/// Final relative KKT residual `eta`.
///
/// # Safety
/// `result` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_result_eta(result: *const BsdpResult, out: *mut f64) -> BsdpStatus {
    guard(|| {
        let r = try_ffi!(ref_arg(result, "result"));
        *try_ffi!(out_arg(out, "out")) = r.res.info.eta;
        BsdpStatus::Ok
    })
}

/// Stop reason and iteration counts of both phases. Any output may be NULL.
///
/// # Safety
/// `result` must be NULL or a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_result_termination(
    result: *const BsdpResult,
    termination: *mut BsdpTermination,
    iter_phase1: *mut usize,
    iter_phase2: *mut usize,
) -> BsdpStatus {
    guard(|| {
        let r = try_ffi!(ref_arg(result, "result"));
        let t = match r.res.info.termination {
            StopDecision::Converged => BsdpTermination::Converged,
            StopDecision::MaxIter => BsdpTermination::MaxIter,
            StopDecision::MaxTime => BsdpTermination::MaxTime,
            StopDecision::Stagnation => BsdpTermination::Stagnation,
            StopDecision::Continue => return fail(BsdpStatus::Solve, "solve did not terminate"),
        };
        if let Some(o) = termination.as_mut() {
            *o = t;
        }
        if let Some(o) = iter_phase1.as_mut() {
            *o = r.res.info.iter_phase1;
        }
        if let Some(o) = iter_phase2.as_mut() {
            *o = r.res.info.iter_phase2;
        }
        BsdpStatus::Ok
    })
}

/// Order of block `j` of `X`: the matrix order for PSD blocks, the length
/// for linear blocks.
///
/// # Safety
/// `result` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn bsdp_result_block_size(result: *const BsdpResult, j: usize, out: *mut usize) -> BsdpStatus {
    guard(|| {
        let r = try_ffi!(ref_arg(result, "result"));
        let out = try_ffi!(out_arg(out, "out"));
        if j >= r.data.blk.len() {
            return fail(BsdpStatus::InvalidArgument, format!("block {j} out of range"));
        }
        *out = r.data.blk.block(j).size;
        BsdpStatus::Ok
    })
}

/// Copies block `j` of the primal `X` into `buf` as a dense column-major
/// `n x n` matrix; linear blocks are returned as a diagonal matrix.
/// `len` is the capacity of `buf` in doubles and must be at least `n * n`.
///
/// # Safety
/// `result` must be NULL or a live handle; `buf` must be NULL or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn bsdp_result_x_block(result: *const BsdpResult, j: usize, buf: *mut f64, len: usize) -> BsdpStatus {
    guard(|| {
        let r = try_ffi!(ref_arg(result, "result"));
        if j >= r.data.blk.len() {
            return fail(BsdpStatus::InvalidArgument, format!("block {j} out of range"));
        }
        let mat = r.res.state.x.matrix(&r.data.blk, j);
        copy_out(mat.as_slice(), buf, len)
    })
}

/// Copies the equality multipliers `y` (length `m`) into `buf`.
///
/// # Safety
/// `result` must be NULL or a live handle; `buf` must be NULL or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn bsdp_result_y(result: *const BsdpResult, buf: *mut f64, len: usize) -> BsdpStatus {
    guard(|| {
        let r = try_ffi!(ref_arg(result, "result"));
        copy_out(r.res.state.y.as_slice(), buf, len)
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> BsdpStatus {
    if buf.is_null() {
        return fail(BsdpStatus::NullArgument, "buf is NULL");
    }
    if len < src.len() {
        return fail(BsdpStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", src.len()));
    }
    std::slice::from_raw_parts_mut(buf, src.len()).copy_from_slice(src);
    BsdpStatus::Ok
}

/// Writes the full result record (objectives, diagnostics, iterate, history) as JSON.
///
/// # Safety
/// `result` must be NULL or a live handle; `path` must be NULL or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bsdp_result_write_json(result: *const BsdpResult, path: *const c_char) -> BsdpStatus {
    guard(|| {
        let r = try_ffi!(ref_arg(result, "result"));
        let path = try_ffi!(str_arg(path, "path"));
        match io::write_result(&r.data, &r.res, r.objective, Path::new(path)) {
            Ok(()) => BsdpStatus::Ok,
            Err(e) => fail(BsdpStatus::Io, e.to_string()),
        }
    })
}

/// Releases a result handle. NULL is ignored.
///
/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bsdp_result_free(result: *mut BsdpResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
