//! C ABI over `onestep-glm`: opaque data and session handles, status codes,
//! and a per-thread last-error message.
//!
//! Every function returns an [`OglmStatus`]. On failure the message for the
//! calling thread is available from [`oglm_last_error_message`]. Panics are
//! caught at the boundary and reported as [`OglmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use onestep_glm::estimators::global_estimate;
use onestep_glm::glm::{derivatives, fit_mle, DataShard, GlmFamily, SolverConfig};
use onestep_glm::inference::chi2_sf;
use onestep_glm::runtime::{run_one_step_protocol, Master};
use onestep_glm::sharding::{make_plan, ShardingStrategy};
use onestep_glm::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OglmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Domain = 4,
    Singular = 5,
    PilotTooSmall = 6,
    OneShotUnavailable = 7,
    Worker = 8,
    Experiment = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OglmFamily {
    Logistic = 0,
    Poisson = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OglmSharding {
    Random = 0,
    /// Blocks of rows ordered by their covariate sums.
    CovariateSum = 1,
    Contiguous = 2,
}

/// Diagnostics of an iterative fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OglmFitInfo {
    /// Kernel log-likelihood at the estimate; NaN when not computed.
    pub log_lik: f64,
    pub iterations: u32,
    pub converged: bool,
    pub final_step_norm: f64,
}

/// Communication used by a distributed call.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OglmRoundStats {
    pub rounds: usize,
    /// Rounds that broadcast coefficients or pull rows.
    pub heavy_rounds: usize,
    pub bytes: u64,
}

/// Rows of a dataset. Opaque.
pub struct OglmData(DataShard);

/// A master with in-process workers over a sharded dataset. Opaque.
pub struct OglmSession {
    master: Master,
    family: GlmFamily,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OglmStatus {
    match e {
        Error::Shape(_) => OglmStatus::Shape,
        Error::Domain(_) => OglmStatus::Domain,
        Error::NotPositiveDefinite { .. } | Error::SingularInformation { .. } => OglmStatus::Singular,
        Error::PilotTooSmall { .. } => OglmStatus::PilotTooSmall,
        Error::OneShotUnavailable { .. } => OglmStatus::OneShotUnavailable,
        Error::Aggregation { .. } | Error::Protocol(_) => OglmStatus::Worker,
        Error::Experiment(_) => OglmStatus::Experiment,
        Error::Config(_) | Error::Allocation { .. } => OglmStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (OglmStatus, String)>) -> OglmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OglmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside onestep-glm".into());
            OglmStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (OglmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (OglmStatus, String) {
    (OglmStatus::NullPointer, format!("{what} is NULL"))
}

fn family(f: OglmFamily) -> GlmFamily {
    match f {
        OglmFamily::Logistic => GlmFamily::Logistic,
        OglmFamily::Poisson => GlmFamily::Poisson,
    }
}

fn out_len(len: usize, d: usize, what: &str) -> Result<(), (OglmStatus, String)> {
    if len != d {
        return Err((OglmStatus::Shape, format!("{what} has length {len}, expected {d}")));
    }
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn oglm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Upper-tail probability of the chi-square distribution.
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn oglm_chi2_sf(x: f64, df: u32, out: *mut f64) -> OglmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = chi2_sf(x, df).map_err(lib_err)?;
        // SAFETY: checked non-null; the caller guarantees validity.
        unsafe { *out = v };
        Ok(())
    })
}

/// Copies `n` responses and an `n × d` row-major design into a new handle.
///
/// # Safety
/// `y` must point to `n` doubles, `x` to `n * d` doubles, and `out` must be
/// valid for one pointer write. Free the handle with [`oglm_data_free`].
#[no_mangle]
pub unsafe extern "C" fn oglm_data_new(
    y: *const f64,
    x: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut OglmData,
) -> OglmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if y.is_null() || x.is_null() {
            return Err(null("y or x"));
        }
        let len = n.checked_mul(d).ok_or((OglmStatus::Shape, "n * d overflows".to_string()))?;
        // SAFETY: the caller guarantees the lengths.
        let (ys, xs) = unsafe { (std::slice::from_raw_parts(y, n), std::slice::from_raw_parts(x, len)) };
        let shard = DataShard::from_rows(ys.to_vec(), xs.to_vec(), d).map_err(lib_err)?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(OglmData(shard))) };
        Ok(())
    })
}

/// # Safety
/// `data` must be NULL or a handle from [`oglm_data_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oglm_data_free(data: *mut OglmData) {
    if !data.is_null() {
        // SAFETY: the handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(data) });
    }
}

/// Maximum-likelihood fit by Fisher scoring. `init` may be NULL (zeros).
/// `tol <= 0` and `max_iter == 0` select the defaults.
///
/// # Safety
/// `data` must be a live handle; `init` (if non-NULL) and `beta_out` must
/// point to `beta_len` doubles; `info_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn oglm_fit(
    data: *const OglmData,
    fam: OglmFamily,
    init: *const f64,
    tol: f64,
    max_iter: u32,
    beta_out: *mut f64,
    beta_len: usize,
    info_out: *mut OglmFitInfo,
) -> OglmStatus {
    guard(|| {
        // SAFETY: the caller guarantees the handle is live.
        let data = unsafe { data.as_ref() }.ok_or_else(|| null("data"))?;
        if beta_out.is_null() {
            return Err(null("beta_out"));
        }
        let d = data.0.dim();
        out_len(beta_len, d, "beta_out")?;
        let start = if init.is_null() {
            vec![0.0; d]
        } else {
            // SAFETY: the caller guarantees `beta_len` doubles.
            unsafe { std::slice::from_raw_parts(init, d) }.to_vec()
        };
        let cfg = solver(tol, max_iter).map_err(lib_err)?;
        let r = fit_mle(family(fam), &data.0, &start, &cfg).map_err(lib_err)?;
        // SAFETY: checked non-null, length checked.
        unsafe { std::slice::from_raw_parts_mut(beta_out, d) }.copy_from_slice(&r.beta);
        if !info_out.is_null() {
            // SAFETY: non-null, caller guarantees validity.
            unsafe {
                *info_out = OglmFitInfo {
                    log_lik: r.log_lik.unwrap_or(f64::NAN),
                    iterations: r.iterations,
                    converged: r.converged,
                    final_step_norm: r.final_step_norm,
                }
            };
        }
        Ok(())
    })
}

fn solver(tol: f64, max_iter: u32) -> Result<SolverConfig, Error> {
    let mut cfg = SolverConfig::default();
    if tol > 0.0 {
        cfg.tol = tol;
    }
    if max_iter > 0 {
        cfg.max_iter = max_iter;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Score, row-major information and kernel log-likelihood at `beta`.
///
/// # Safety
/// `beta` and `score_out` must hold `d` doubles, `info_out` `d * d`, and
/// `log_lik_out` one.
#[no_mangle]
pub unsafe extern "C" fn oglm_derivatives(
    data: *const OglmData,
    fam: OglmFamily,
    beta: *const f64,
    d: usize,
    score_out: *mut f64,
    info_out: *mut f64,
    log_lik_out: *mut f64,
) -> OglmStatus {
    guard(|| {
        // SAFETY: the caller guarantees the handle is live.
        let data = unsafe { data.as_ref() }.ok_or_else(|| null("data"))?;
        if beta.is_null() || score_out.is_null() || info_out.is_null() || log_lik_out.is_null() {
            return Err(null("beta or an output buffer"));
        }
        out_len(d, data.0.dim(), "beta")?;
        // SAFETY: lengths guaranteed by the caller.
        let b = unsafe { std::slice::from_raw_parts(beta, d) };
        let bundle = derivatives(family(fam), &data.0, b).map_err(lib_err)?;
        // SAFETY: as above.
        unsafe {
            std::slice::from_raw_parts_mut(score_out, d).copy_from_slice(&bundle.score);
            std::slice::from_raw_parts_mut(info_out, d * d).copy_from_slice(bundle.info.as_slice());
            *log_lik_out = bundle.log_lik;
        }
        Ok(())
    })
}

/// Shards `data` across `workers` in-process workers.
///
/// # Safety
/// `data` must be a live handle and `out` valid for one pointer write. Free
/// the session with [`oglm_session_free`]; `data` may be freed right away.
#[no_mangle]
pub unsafe extern "C" fn oglm_session_new(
    data: *const OglmData,
    fam: OglmFamily,
    workers: usize,
    sharding: OglmSharding,
    seed: u64,
    out: *mut *mut OglmSession,
) -> OglmStatus {
    guard(|| {
        // SAFETY: the caller guarantees the handle is live.
        let data = unsafe { data.as_ref() }.ok_or_else(|| null("data"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let strategy = match sharding {
            OglmSharding::Random => ShardingStrategy::Random,
            OglmSharding::CovariateSum => ShardingStrategy::CovariateSumOrdered,
            OglmSharding::Contiguous => ShardingStrategy::Contiguous,
        };
        let shards = make_plan(strategy, &data.0, workers, seed).and_then(|p| p.split(&data.0)).map_err(lib_err)?;
        let master = Master::in_process(family(fam), shards).map_err(lib_err)?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(OglmSession { master, family: family(fam) })) };
        Ok(())
    })
}

/// # Safety
/// `session` must be NULL or a handle from [`oglm_session_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oglm_session_free(session: *mut OglmSession) {
    if !session.is_null() {
        // SAFETY: the handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(session) });
    }
}

fn write_stats(stats: *mut OglmRoundStats, t: &onestep_glm::runtime::Transcript) {
    if !stats.is_null() {
        // SAFETY: non-null; the caller guarantees validity.
        unsafe {
            *stats = OglmRoundStats { rounds: t.rounds.len(), heavy_rounds: t.heavy_rounds(), bytes: t.total_bytes() }
        };
    }
}

/// Pilot sample of `pilot_n` rows, then one Newton step over all shards.
///
/// # Safety
/// `session` must be live; `beta_out` must hold `beta_len` doubles; `stats`
/// may be NULL.
#[no_mangle]
pub unsafe extern "C" fn oglm_session_one_step(
    session: *mut OglmSession,
    pilot_n: usize,
    seed: u64,
    beta_out: *mut f64,
    beta_len: usize,
    stats: *mut OglmRoundStats,
) -> OglmStatus {
    guard(|| {
        // SAFETY: the caller guarantees the handle is live and unaliased.
        let s = unsafe { session.as_mut() }.ok_or_else(|| null("session"))?;
        if beta_out.is_null() {
            return Err(null("beta_out"));
        }
        let d = s.master.dim().map_err(lib_err)?;
        out_len(beta_len, d, "beta_out")?;
        let o = run_one_step_protocol(&mut s.master, s.family, pilot_n, seed, &SolverConfig::default()).map_err(lib_err)?;
        // SAFETY: checked non-null, length checked.
        unsafe { std::slice::from_raw_parts_mut(beta_out, d) }.copy_from_slice(&o.estimate.beta);
        write_stats(stats, &o.transcript);
        Ok(())
    })
}

/// Distributed Fisher scoring from zero; one aggregation round per
/// evaluation.
///
/// # Safety
/// As for [`oglm_session_one_step`]; `info_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn oglm_session_global(
    session: *mut OglmSession,
    tol: f64,
    max_iter: u32,
    beta_out: *mut f64,
    beta_len: usize,
    info_out: *mut OglmFitInfo,
    stats: *mut OglmRoundStats,
) -> OglmStatus {
    guard(|| {
        // SAFETY: the caller guarantees the handle is live and unaliased.
        let s = unsafe { session.as_mut() }.ok_or_else(|| null("session"))?;
        if beta_out.is_null() {
            return Err(null("beta_out"));
        }
        let d = s.master.dim().map_err(lib_err)?;
        out_len(beta_len, d, "beta_out")?;
        let cfg = solver(tol, max_iter).map_err(lib_err)?;
        let mark = s.master.transcript().rounds.len();
        let r = global_estimate(&mut s.master, None, &cfg).map_err(lib_err)?;
        // SAFETY: checked non-null, length checked.
        unsafe { std::slice::from_raw_parts_mut(beta_out, d) }.copy_from_slice(&r.beta);
        if !info_out.is_null() {
            // SAFETY: non-null; the caller guarantees validity.
            unsafe {
                *info_out = OglmFitInfo {
                    log_lik: r.log_lik.unwrap_or(f64::NAN),
                    iterations: r.iterations,
                    converged: r.converged,
                    final_step_norm: r.final_step_norm,
                }
            };
        }
        write_stats(stats, &s.master.transcript().since(mark));
        Ok(())
    })
}
