//! C ABI over `csa-core`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`CsaStatus`]; on failure a description is available from
//! [`csa_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use csa_core::analysis::{bound_root, threshold};
use csa_core::harness::{run_sweep, Scheme, SweepSpec};
use csa_core::sic::{decode_without_sic, peel};
use csa_core::traffic::build_graph;
use csa_core::{ContentionGraph, DecodeTrace, DegreeDistribution, SimRng};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Utf8 = 3,
    Panic = 4,
}

/// Degree distribution handle.
pub struct CsaDistribution(DegreeDistribution);

/// Contention graph handle.
pub struct CsaGraph(ContentionGraph);

/// Decoding result handle.
pub struct CsaTrace(DecodeTrace);

/// One load point of a sweep.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CsaSweepRow {
    pub load: f64,
    pub trials: usize,
    pub throughput: f64,
    pub throughput_ci95: f64,
    pub plr: f64,
    pub plr_ci95: f64,
    pub mean_iters: f64,
    pub mean_delay: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(CsaStatus, String);

impl Failure {
    fn invalid(e: impl ToString) -> Self {
        Failure(CsaStatus::InvalidArgument, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CsaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CsaStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(CsaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(CsaStatus::NullPointer, "output pointer is null".into()));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    deref(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message describing the last failed call on this thread; empty after a
/// success. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn csa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn csa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a distribution such as `"2:0.5,3:0.5"`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_distribution_parse(text: *const c_char, out: *mut *mut CsaDistribution) -> CsaStatus {
    guard(|| {
        deref(text, "text")?;
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Failure(CsaStatus::Utf8, e.to_string()))?;
        let dist: DegreeDistribution = text.parse().map_err(Failure::invalid)?;
        write(out, boxed(CsaDistribution(dist)))
    })
}

/// # Safety
/// `dist` must come from [`csa_distribution_parse`] and not be freed yet; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn csa_distribution_free(dist: *mut CsaDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_distribution_mean_degree(dist: *const CsaDistribution, out: *mut f64) -> CsaStatus {
    guard(|| write(out, deref(dist, "dist")?.0.mean_degree()))
}

/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_distribution_rate(dist: *const CsaDistribution, out: *mut f64) -> CsaStatus {
    guard(|| write(out, deref(dist, "dist")?.0.rate()))
}

/// Density-evolution threshold, bisected to `tol`.
///
/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_threshold(dist: *const CsaDistribution, tol: f64, out: *mut f64) -> CsaStatus {
    guard(|| {
        let dist = deref(dist, "dist")?;
        if !(tol > 0.0) {
            return Err(Failure::invalid(format!("tolerance {tol} must be positive")));
        }
        write(out, threshold(&dist.0, tol))
    })
}

/// Threshold upper bound at rate `rate` in (0, 1).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csa_bound_root(rate: f64, out: *mut f64) -> CsaStatus {
    guard(|| write(out, bound_root(rate).map_err(Failure::invalid)?))
}

/// Builds a graph from user placements in compressed form: the slots of
/// user `u` are `slots[offsets[u] .. offsets[u + 1]]`, with
/// `offsets` holding `num_users + 1` entries.
///
/// # Safety
/// `offsets` must hold `num_users + 1` values and `slots` at least
/// `offsets[num_users]`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csa_graph_new(
    num_slots: usize,
    num_users: usize,
    offsets: *const usize,
    slots: *const usize,
    out: *mut *mut CsaGraph,
) -> CsaStatus {
    guard(|| {
        let offsets = slice(offsets, num_users + 1, "offsets")?;
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Failure::invalid("offsets must be nondecreasing"));
        }
        let end = *offsets.last().expect("non-empty");
        let slots = slice(slots, end, "slots")?;
        let placements = offsets.windows(2).map(|w| slots[w[0]..w[1]].to_vec()).collect();
        let graph = ContentionGraph::new(num_slots, placements).map_err(Failure::invalid)?;
        write(out, boxed(CsaGraph(graph)))
    })
}

/// Random graph of `num_users` users drawing degrees from `dist`.
///
/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_graph_random(
    num_users: usize,
    num_slots: usize,
    dist: *const CsaDistribution,
    seed: u64,
    out: *mut *mut CsaGraph,
) -> CsaStatus {
    guard(|| {
        let dist = deref(dist, "dist")?;
        let graph = build_graph(num_users, num_slots, &dist.0, &mut SimRng::from_seed(seed)).map_err(Failure::invalid)?;
        write(out, boxed(CsaGraph(graph)))
    })
}

/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn csa_graph_free(graph: *mut CsaGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; `users` and `slots` writable or null.
#[no_mangle]
pub unsafe extern "C" fn csa_graph_size(graph: *const CsaGraph, users: *mut usize, slots: *mut usize) -> CsaStatus {
    guard(|| {
        let g = &deref(graph, "graph")?.0;
        if !users.is_null() {
            users.write(g.num_users());
        }
        if !slots.is_null() {
            slots.write(g.num_slots());
        }
        Ok(())
    })
}

/// Iterative interference cancellation to fixpoint.
///
/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_peel(graph: *const CsaGraph, out: *mut *mut CsaTrace) -> CsaStatus {
    guard(|| write(out, boxed(CsaTrace(peel(&deref(graph, "graph")?.0)))))
}

/// Singleton-only decoding.
///
/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_decode_without_sic(graph: *const CsaGraph, out: *mut *mut CsaTrace) -> CsaStatus {
    guard(|| write(out, boxed(CsaTrace(decode_without_sic(&deref(graph, "graph")?.0)))))
}

/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn csa_trace_free(trace: *mut CsaTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Resolved user count and number of productive rounds.
///
/// # Safety
/// `trace` must be a live handle; `resolved` and `iterations` writable or null.
#[no_mangle]
pub unsafe extern "C" fn csa_trace_summary(
    trace: *const CsaTrace,
    resolved: *mut usize,
    iterations: *mut usize,
) -> CsaStatus {
    guard(|| {
        let t = &deref(trace, "trace")?.0;
        if !resolved.is_null() {
            resolved.write(t.num_resolved());
        }
        if !iterations.is_null() {
            iterations.write(t.iterations);
        }
        Ok(())
    })
}

/// Slot whose replica resolved `user`, or -1 when it stayed unresolved.
///
/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_trace_recovery_slot(trace: *const CsaTrace, user: usize, out: *mut i64) -> CsaStatus {
    guard(|| {
        let t = &deref(trace, "trace")?.0;
        let slot = t
            .recovery_slot
            .get(user)
            .ok_or_else(|| Failure::invalid(format!("user {user} out of range")))?;
        write(out, slot.map_or(-1, |s| s as i64))
    })
}

/// Monte Carlo sweep of repetition CSA over `num_loads` load points,
/// writing one row per point into `rows`.
///
/// # Safety
/// `dist` must be a live handle, `loads` must hold `num_loads` values and
/// `rows` room for `num_loads` rows.
#[no_mangle]
pub unsafe extern "C" fn csa_sweep(
    dist: *const CsaDistribution,
    num_slots: usize,
    loads: *const f64,
    num_loads: usize,
    trials: usize,
    seed: u64,
    rows: *mut CsaSweepRow,
) -> CsaStatus {
    guard(|| {
        let dist = deref(dist, "dist")?;
        let loads = slice(loads, num_loads, "loads")?.to_vec();
        if num_loads > 0 && rows.is_null() {
            return Err(Failure(CsaStatus::NullPointer, "rows is null".into()));
        }
        let spec = SweepSpec::new(Scheme::Repetition(dist.0.clone()), loads, num_slots, trials, seed);
        let report = run_sweep(&spec).map_err(Failure::invalid)?;
        for (i, r) in report.rows.iter().enumerate() {
            rows.add(i).write(CsaSweepRow {
                load: r.load,
                trials: r.trials,
                throughput: r.throughput,
                throughput_ci95: r.throughput_ci95,
                plr: r.plr,
                plr_ci95: r.plr_ci95,
                mean_iters: r.mean_iters,
                mean_delay: r.mean_delay,
            });
        }
        Ok(())
    })
}

