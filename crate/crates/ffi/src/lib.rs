//! C ABI over `rbb-core`.
//!
//! Every function returns an [`RbbStatus`]; on anything but `RBB_STATUS_OK`
//! a description is available from [`rbb_last_error_message`] on the same
//! thread. Simulations are opaque [`RbbSim`] handles owned by the caller and
//! released with [`rbb_sim_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rbb::exact::{enumerate_states, stationary_dense, stationary_distribution, transition_kernel};
use rbb::exact::{DEFAULT_STATE_CAP, DEFAULT_TUPLE_CAP, DENSE_SOLVE_LIMIT};
use rbb::observables::{empty_stats, log_exponential_potential, quadratic_potential};
use rbb::traversal::{cover_times, TieBreak};
use rbb::{InitialConfig, LoadVector, Process, RandomSource, RbbError, Simulation};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    CapExceeded = 4,
    Overflow = 5,
    NonConvergence = 6,
    UnknownCheck = 7,
    BufferTooSmall = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbbProcess {
    Rbb = 0,
    Idealized = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbbInit {
    Uniform = 0,
    SingleBin = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbbTieBreak {
    BallId = 0,
    Random = 1,
}

/// Snapshot of the observables at the current round.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RbbObservation {
    pub round: u64,
    pub empty: u64,
    pub nonempty: u64,
    pub empty_fraction: f64,
    /// Sum of squared loads, split into 64-bit halves (exact).
    pub quadratic_lo: u64,
    pub quadratic_hi: u64,
    /// Natural log of the exponential potential at the requested alpha.
    pub log_phi: f64,
    pub max_load: u64,
}

/// Outcome of a named check; several sub-statements are folded together.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RbbCheckResult {
    pub passed: bool,
    /// Statistic and threshold of the first failing report, or of the first
    /// report when all pass.
    pub statistic: f64,
    pub threshold: f64,
    pub reports: u32,
}

/// Opaque simulation handle.
pub struct RbbSim {
    sim: Simulation<RandomSource>,
}

/// Cover-time marker for a ball still uncovered at the cap.
pub const RBB_UNCOVERED: u64 = u64::MAX;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &RbbError) -> RbbStatus {
    match e {
        RbbError::InvalidConfig(_) | RbbError::BallsMismatch { .. } | RbbError::TooManyBalls(_) => {
            RbbStatus::InvalidArgument
        }
        RbbError::DominanceViolated { .. }
        | RbbError::RangeViolation { .. }
        | RbbError::Precondition(_)
        | RbbError::EmptyInput => RbbStatus::Precondition,
        RbbError::CapExceeded { .. } => RbbStatus::CapExceeded,
        RbbError::Overflow(_) => RbbStatus::Overflow,
        RbbError::NonConvergence(_) => RbbStatus::NonConvergence,
        RbbError::UnknownCheck(_) => RbbStatus::UnknownCheck,
        RbbError::Io(_) => RbbStatus::Io,
    }
}

struct Fail(RbbStatus, String);

impl From<RbbError> for Fail {
    fn from(e: RbbError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RbbStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RbbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RbbStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RbbStatus::Panic
        }
    }
}

fn process_of(p: RbbProcess) -> Process {
    match p {
        RbbProcess::Rbb => Process::Rbb,
        RbbProcess::Idealized => Process::Idealized,
    }
}

fn init_of(i: RbbInit) -> InitialConfig {
    match i {
        RbbInit::Uniform => InitialConfig::Uniform,
        RbbInit::SingleBin => InitialConfig::SingleBin,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rbb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rbb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a simulation of `m` balls in `n` bins.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rbb_sim_new(
    n: usize,
    m: u64,
    init: RbbInit,
    process: RbbProcess,
    seed: u64,
    stream: u64,
    out: *mut *mut RbbSim,
) -> RbbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let state = init_of(init).build(n, m)?;
        let sim = Simulation::new(process_of(process), state, RandomSource::new(seed, stream));
        // SAFETY: checked non-null; the caller guarantees it is writable.
        unsafe { *out = Box::into_raw(Box::new(RbbSim { sim })) };
        Ok(())
    })
}

/// Creates a simulation from `n` explicit loads.
///
/// # Safety
/// `loads` must point to `n` readable values and `out` to writable storage
/// for one handle.
#[no_mangle]
pub unsafe extern "C" fn rbb_sim_new_from_loads(
    loads: *const u64,
    n: usize,
    process: RbbProcess,
    seed: u64,
    stream: u64,
    out: *mut *mut RbbSim,
) -> RbbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if loads.is_null() && n > 0 {
            return Err(null("loads"));
        }
        let values = if n == 0 {
            Vec::new()
        } else {
            // SAFETY: non-null and `n` readable values per the contract.
            unsafe { std::slice::from_raw_parts(loads, n) }.to_vec()
        };
        let state = LoadVector::new(values)?;
        let sim = Simulation::new(process_of(process), state, RandomSource::new(seed, stream));
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(RbbSim { sim })) };
        Ok(())
    })
}

/// Releases a handle; NULL is ignored.
///
/// # Safety
/// `sim` must come from `rbb_sim_new*` and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn rbb_sim_free(sim: *mut RbbSim) {
    if !sim.is_null() {
        // SAFETY: ownership returns from the caller exactly once.
        drop(unsafe { Box::from_raw(sim) });
    }
}

unsafe fn sim_mut<'a>(sim: *mut RbbSim) -> Result<&'a mut RbbSim, Fail> {
    // SAFETY: the caller passes a live handle or NULL.
    unsafe { sim.as_mut() }.ok_or_else(|| null("sim"))
}

/// Advances the simulation by `rounds` rounds.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rbb_sim_step(sim: *mut RbbSim, rounds: u64) -> RbbStatus {
    guard(|| {
        let s = unsafe { sim_mut(sim) }?;
        for _ in 0..rounds {
            s.sim.step();
        }
        Ok(())
    })
}

/// Number of bins, or 0 for a NULL handle.
///
/// # Safety
/// `sim` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rbb_sim_bins(sim: *const RbbSim) -> usize {
    // SAFETY: live handle or NULL.
    unsafe { sim.as_ref() }.map_or(0, |s| s.sim.state().bins())
}

/// Copies the current loads into `buf`, which must hold at least as many
/// entries as there are bins.
///
/// # Safety
/// `sim` must be a live handle and `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn rbb_sim_loads(sim: *const RbbSim, buf: *mut u64, len: usize) -> RbbStatus {
    guard(|| {
        // SAFETY: live handle or NULL.
        let s = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        let loads = s.sim.state().loads();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < loads.len() {
            return Err(Fail(
                RbbStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", loads.len()),
            ));
        }
        // SAFETY: `buf` has room for `len >= loads.len()` values.
        unsafe { ptr::copy_nonoverlapping(loads.as_ptr(), buf, loads.len()) };
        Ok(())
    })
}

/// Fills `out` with the observables of the current round; `alpha` sets the
/// exponential potential's smoothing parameter.
///
/// # Safety
/// `sim` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rbb_sim_observe(sim: *const RbbSim, alpha: f64, out: *mut RbbObservation) -> RbbStatus {
    guard(|| {
        // SAFETY: live handle or NULL.
        let s = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Fail(RbbStatus::InvalidArgument, format!("alpha must be positive, got {alpha}")));
        }
        let x = s.sim.state();
        let e = empty_stats(x);
        let q = quadratic_potential(x);
        let obs = RbbObservation {
            round: s.sim.round(),
            empty: e.empty,
            nonempty: e.nonempty,
            empty_fraction: e.fraction(),
            quadratic_lo: q as u64,
            quadratic_hi: (q >> 64) as u64,
            log_phi: log_exponential_potential(x.loads(), alpha),
            max_load: x.max_load(),
        };
        // SAFETY: checked non-null.
        unsafe { *out = obs };
        Ok(())
    })
}

/// Runs the FIFO traversal until every ball has visited every bin or `cap`
/// rounds pass. Writes one cover round per ball (ascending ball id, balls
/// numbered in ascending bin order) into `out`, with [`RBB_UNCOVERED`] for
/// balls still uncovered at the cap.
///
/// # Safety
/// `out` must point to `len >= m` writable values; `covered` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn rbb_cover_times(
    n: usize,
    m: u64,
    init: RbbInit,
    tie: RbbTieBreak,
    cap: u64,
    seed: u64,
    stream: u64,
    out: *mut u64,
    len: usize,
    covered: *mut u64,
) -> RbbStatus {
    guard(|| {
        if out.is_null() && m > 0 {
            return Err(null("out"));
        }
        if (len as u64) < m {
            return Err(Fail(RbbStatus::BufferTooSmall, format!("buffer holds {len} values, {m} needed")));
        }
        let tie = match tie {
            RbbTieBreak::BallId => TieBreak::ByBallId,
            RbbTieBreak::Random => TieBreak::Random,
        };
        let mut rng = RandomSource::new(seed, stream);
        let (times, _) = cover_times(n, m, &init_of(init), tie, cap, &mut rng)?;
        for (i, t) in times.iter().enumerate() {
            // SAFETY: `i < m <= len`.
            unsafe { *out.add(i) = t.unwrap_or(RBB_UNCOVERED) };
        }
        if !covered.is_null() {
            // SAFETY: non-null, caller-provided.
            unsafe { *covered = times.iter().filter(|t| t.is_some()).count() as u64 };
        }
        Ok(())
    })
}

/// Runs a named validation check with the given master seed.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rbb_run_check(name: *const c_char, seed: u64, out: *mut RbbCheckResult) -> RbbStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: NUL-terminated per the contract.
        let name = unsafe { CStr::from_ptr(name) }
            .to_str()
            .map_err(|_| Fail(RbbStatus::InvalidArgument, "check name is not UTF-8".into()))?;
        let reports = rbb::suite::run_check(name, seed)?;
        let pick = reports.iter().find(|r| !r.passed()).or(reports.first());
        let result = RbbCheckResult {
            passed: reports.iter().all(|r| r.passed()),
            statistic: pick.map_or(f64::NAN, |r| r.statistic),
            threshold: pick.map_or(f64::NAN, |r| r.threshold),
            reports: reports.len() as u32,
        };
        // SAFETY: checked non-null.
        unsafe { *out = result };
        Ok(())
    })
}

/// Exact stationary law of the chain on `n` bins and `m` balls, restricted
/// to the class reached from the uniform configuration. States are listed in
/// colexicographic order; `probs` receives one probability per state and
/// `states`, when non-NULL, `n` loads per state. `count` always receives the
/// number of states, so a call with `len = 0` sizes the buffers.
///
/// # Safety
/// `probs` must hold `len` values and `states` (if non-NULL) `len * n`;
/// `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rbb_oracle_stationary(
    n: usize,
    m: u64,
    probs: *mut f64,
    states: *mut u64,
    len: usize,
    count: *mut usize,
) -> RbbStatus {
    guard(|| {
        if count.is_null() {
            return Err(null("count"));
        }
        let space = enumerate_states(n, m, DEFAULT_STATE_CAP)?;
        // SAFETY: checked non-null.
        unsafe { *count = space.len() };
        if len < space.len() {
            return Err(Fail(
                RbbStatus::BufferTooSmall,
                format!("buffer holds {len} states, {} needed", space.len()),
            ));
        }
        if probs.is_null() {
            return Err(null("probs"));
        }
        let kernel = transition_kernel(space, DEFAULT_TUPLE_CAP)?;
        let start = InitialConfig::Uniform.build(n, m)?;
        let pi = if kernel.space.len() <= DENSE_SOLVE_LIMIT {
            stationary_dense(&kernel, start.loads())?
        } else {
            stationary_distribution(&kernel, start.loads(), 1e-12, 1_000_000)?
        };
        for (i, p) in pi.iter().enumerate() {
            // SAFETY: `i < space.len() <= len`.
            unsafe { *probs.add(i) = *p };
        }
        if !states.is_null() {
            for (i, s) in kernel.space.states.iter().enumerate() {
                // SAFETY: `states` holds `len * n` values.
                unsafe { ptr::copy_nonoverlapping(s.as_ptr(), states.add(i * n), n) };
            }
        }
        Ok(())
    })
}
