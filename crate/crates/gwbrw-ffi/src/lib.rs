//! C ABI over the `gwbrw` library.
//!
//! Every object crossing the boundary is an opaque handle allocated here and
//! released by the matching `*_free` function; freeing null is a no-op, and
//! no function takes ownership of a handle it did not create. Fallible calls
//! return a [`GwbrwStatus`] and write results through out-pointers only on
//! `Ok`; the most recent failure message on the calling thread is readable
//! via [`gwbrw_last_error_message`]. Panics never unwind across the
//! boundary: they are caught and reported as [`GwbrwStatus::Panic`].
//!
//! The generated header lands in `include/gwbrw.h` at build time.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use gwbrw::brw::{sample_heights, HeightBRW};
use gwbrw::experiments_cli::{
    run_experiment, CliError, ExperimentConfig, OutputFormat, RunMeta, RunOutput,
};
use gwbrw::gw_sampler::{
    sample_gw_conditioned, scaling_a_n, DistributionSpec, OffspringDistribution,
};
use gwbrw::stats::replicate_rng;
use gwbrw::tree_core::OrderedTree;
use gwbrw::walk_estimates::estimate_c_lln;

/// Outcome of a fallible call. Anything other than `Ok` leaves the
/// out-parameters untouched and records a message for
/// [`gwbrw_last_error_message`].
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GwbrwStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument was out of range or structurally invalid.
    InvalidArgument = 2,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 3,
    /// Conditioned sampling gave up (see the error message for the budget).
    Sampling = 4,
    /// The experiment configuration was rejected.
    Config = 5,
    /// An experiment failed at runtime.
    Runtime = 6,
    /// A panic was caught at the boundary; the involved handles are still
    /// valid but the call had no effect.
    Panic = 7,
}

/// Serialization format selector for [`gwbrw_report_render`].
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GwbrwFormat {
    Csv = 0,
    Ndjson = 1,
}

/// Offspring distribution handle.
pub struct GwbrwDistribution {
    spec: DistributionSpec,
    mu: OffspringDistribution,
}

/// Ordered rooted tree handle.
pub struct GwbrwTree(OrderedTree);

/// Branching random walk labels over one tree.
pub struct GwbrwWalk(HeightBRW);

/// Finished experiment run: the report plus the metadata stamped on
/// serialized artifacts.
pub struct GwbrwReport {
    output: RunOutput,
    meta: RunMeta,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).expect("nul bytes stripped");
    });
}

fn fail(status: GwbrwStatus, msg: impl std::fmt::Display) -> GwbrwStatus {
    set_error(msg);
    status
}

fn cli_status(err: &CliError) -> GwbrwStatus {
    match err {
        CliError::Config(_) => GwbrwStatus::Config,
        CliError::Runtime(_) => GwbrwStatus::Runtime,
    }
}

/// Runs `f`, converting a panic into `Panic`/`fallback` instead of
/// unwinding into the caller.
fn guarded<T>(fallback: T, f: impl FnOnce() -> T) -> T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic across the C boundary".to_string());
            set_error(format!("panic: {msg}"));
            fallback
        }
    }
}

macro_rules! require {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return fail(GwbrwStatus::NullArgument, concat!(stringify!($ptr), " is null")),
        }
    };
}

fn leak_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes stripped")
        .into_raw()
}

/// Version of the underlying library, a static string; do not free.
#[no_mangle]
pub extern "C" fn gwbrw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failing call on this thread, empty if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gwbrw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from a `gwbrw_*` call documented to transfer ownership,
/// and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Offspring distributions

fn new_distribution(spec: DistributionSpec) -> Result<*mut GwbrwDistribution, GwbrwStatus> {
    match spec.build() {
        Ok(mu) => Ok(Box::into_raw(Box::new(GwbrwDistribution { spec, mu }))),
        Err(e) => Err(fail(GwbrwStatus::InvalidArgument, e)),
    }
}

/// Geometric(1/2) offspring law (mean one, variance two).
#[no_mangle]
pub extern "C" fn gwbrw_distribution_geometric() -> *mut GwbrwDistribution {
    guarded(std::ptr::null_mut(), || {
        new_distribution(DistributionSpec::geometric()).unwrap_or(std::ptr::null_mut())
    })
}

/// Poisson(1) offspring law.
#[no_mangle]
pub extern "C" fn gwbrw_distribution_poisson() -> *mut GwbrwDistribution {
    guarded(std::ptr::null_mut(), || {
        let spec = DistributionSpec {
            kind: "poisson".into(),
            gamma: None,
            table: None,
        };
        new_distribution(spec).unwrap_or(std::ptr::null_mut())
    })
}

/// Heavy-tailed critical law with generating function s + (1-s)^gamma / gamma,
/// gamma in (1, 2].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_distribution_stable(
    gamma: f64,
    out: *mut *mut GwbrwDistribution,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        if out.is_null() {
            return fail(GwbrwStatus::NullArgument, "out is null");
        }
        let spec = DistributionSpec {
            kind: "stable".into(),
            gamma: Some(gamma),
            table: None,
        };
        match new_distribution(spec) {
            Ok(ptr) => {
                unsafe { *out = ptr };
                GwbrwStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Finite-support offspring law given by `pmf[0..len]`; entries must be
/// nonnegative, sum to one, and have mean one.
///
/// # Safety
/// `pmf` must point to `len` readable doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_distribution_table(
    pmf: *const f64,
    len: usize,
    out: *mut *mut GwbrwDistribution,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        if pmf.is_null() || out.is_null() {
            return fail(GwbrwStatus::NullArgument, "pmf or out is null");
        }
        if len == 0 {
            return fail(GwbrwStatus::InvalidArgument, "pmf is empty");
        }
        let table = unsafe { std::slice::from_raw_parts(pmf, len) }.to_vec();
        let spec = DistributionSpec {
            kind: "table".into(),
            gamma: None,
            table: Some(table),
        };
        match new_distribution(spec) {
            Ok(ptr) => {
                unsafe { *out = ptr };
                GwbrwStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Mean of the law; NaN on a null handle.
///
/// # Safety
/// `d` must be a live distribution handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_distribution_mean(d: *const GwbrwDistribution) -> f64 {
    guarded(f64::NAN, || match unsafe { d.as_ref() } {
        Some(d) => d.mu.mean(),
        None => {
            set_error("d is null");
            f64::NAN
        }
    })
}

/// Variance of the law; +inf for the heavy-tailed family, NaN on a null
/// handle.
///
/// # Safety
/// `d` must be a live distribution handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_distribution_variance(d: *const GwbrwDistribution) -> f64 {
    guarded(f64::NAN, || match unsafe { d.as_ref() } {
        Some(d) => d.mu.variance().unwrap_or(f64::INFINITY),
        None => {
            set_error("d is null");
            f64::NAN
        }
    })
}

/// Short human-readable label; free with `gwbrw_string_free`.
///
/// # Safety
/// `d` must be a live distribution handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_distribution_label(d: *const GwbrwDistribution) -> *mut c_char {
    guarded(std::ptr::null_mut(), || match unsafe { d.as_ref() } {
        Some(d) => leak_string(d.spec.label()),
        None => {
            set_error("d is null");
            std::ptr::null_mut()
        }
    })
}

/// Height scaling sequence a_n for trees conditioned to n vertices; NaN on a
/// null handle.
///
/// # Safety
/// `d` must be a live distribution handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_scaling_a_n(d: *const GwbrwDistribution, n: usize) -> f64 {
    guarded(f64::NAN, || match unsafe { d.as_ref() } {
        Some(d) if n >= 1 => scaling_a_n(&d.mu, n),
        Some(_) => {
            set_error("n must be at least 1");
            f64::NAN
        }
        None => {
            set_error("d is null");
            f64::NAN
        }
    })
}

/// # Safety
/// `d` must come from a `gwbrw_distribution_*` constructor; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_distribution_free(d: *mut GwbrwDistribution) {
    if !d.is_null() {
        drop(unsafe { Box::from_raw(d) });
    }
}

// ---------------------------------------------------------------------------
// Trees

/// Samples a critical Galton-Watson tree conditioned to exactly `n`
/// vertices, giving up after `max_tries` rejection rounds (0 picks a default
/// of 100000).
///
/// # Safety
/// `d` must be a live distribution handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_tree_sample(
    d: *const GwbrwDistribution,
    n: usize,
    seed: u64,
    max_tries: u64,
    out: *mut *mut GwbrwTree,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        let d = require!(d);
        if out.is_null() {
            return fail(GwbrwStatus::NullArgument, "out is null");
        }
        if n == 0 {
            return fail(GwbrwStatus::InvalidArgument, "a tree has at least one vertex");
        }
        let tries = if max_tries == 0 { 100_000 } else { max_tries };
        let mut rng = replicate_rng(seed, 0);
        match sample_gw_conditioned(&d.mu, n, &mut rng, tries) {
            Ok(tree) => {
                unsafe { *out = Box::into_raw(Box::new(GwbrwTree(tree))) };
                GwbrwStatus::Ok
            }
            Err(e) => fail(GwbrwStatus::Sampling, e),
        }
    })
}

/// Builds a tree from its depth-first offspring sequence.
///
/// # Safety
/// `counts` must point to `len` readable u32 values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_tree_from_offspring(
    counts: *const u32,
    len: usize,
    out: *mut *mut GwbrwTree,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        if counts.is_null() || out.is_null() {
            return fail(GwbrwStatus::NullArgument, "counts or out is null");
        }
        let seq = unsafe { std::slice::from_raw_parts(counts, len) }.to_vec();
        match OrderedTree::from_offspring(seq) {
            Ok(tree) => {
                unsafe { *out = Box::into_raw(Box::new(GwbrwTree(tree))) };
                GwbrwStatus::Ok
            }
            Err(e) => fail(GwbrwStatus::InvalidArgument, e),
        }
    })
}

/// Parses the line format produced by `gwbrw_tree_to_line`.
///
/// # Safety
/// `line` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_tree_from_line(
    line: *const c_char,
    out: *mut *mut GwbrwTree,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        if line.is_null() || out.is_null() {
            return fail(GwbrwStatus::NullArgument, "line or out is null");
        }
        let text = match unsafe { CStr::from_ptr(line) }.to_str() {
            Ok(t) => t,
            Err(e) => return fail(GwbrwStatus::InvalidUtf8, e),
        };
        match OrderedTree::from_line(text) {
            Ok(tree) => {
                unsafe { *out = Box::into_raw(Box::new(GwbrwTree(tree))) };
                GwbrwStatus::Ok
            }
            Err(e) => fail(GwbrwStatus::InvalidArgument, e),
        }
    })
}

/// Number of vertices; 0 on a null handle.
///
/// # Safety
/// `t` must be a live tree handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_tree_len(t: *const GwbrwTree) -> usize {
    guarded(0, || match unsafe { t.as_ref() } {
        Some(t) => t.0.len(),
        None => {
            set_error("t is null");
            0
        }
    })
}

/// Copies the depth-first offspring sequence into `buf`.
///
/// # Safety
/// `t` must be a live tree handle and `buf` must hold `cap >= len` u32s.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_tree_offspring(
    t: *const GwbrwTree,
    buf: *mut u32,
    cap: usize,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        let t = require!(t);
        if buf.is_null() {
            return fail(GwbrwStatus::NullArgument, "buf is null");
        }
        let seq = t.0.offspring_seq();
        if cap < seq.len() {
            return fail(
                GwbrwStatus::InvalidArgument,
                format!("buffer holds {cap} entries, tree has {}", seq.len()),
            );
        }
        unsafe { std::slice::from_raw_parts_mut(buf, seq.len()) }.copy_from_slice(seq);
        GwbrwStatus::Ok
    })
}

/// Copies the vertex depths (root 0) in depth-first order into `buf`.
///
/// # Safety
/// `t` must be a live tree handle and `buf` must hold `cap >= len` u32s.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_tree_depths(
    t: *const GwbrwTree,
    buf: *mut u32,
    cap: usize,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        let t = require!(t);
        if buf.is_null() {
            return fail(GwbrwStatus::NullArgument, "buf is null");
        }
        let depths = t.0.depths();
        if cap < depths.len() {
            return fail(
                GwbrwStatus::InvalidArgument,
                format!("buffer holds {cap} entries, tree has {}", depths.len()),
            );
        }
        unsafe { std::slice::from_raw_parts_mut(buf, depths.len()) }.copy_from_slice(&depths);
        GwbrwStatus::Ok
    })
}

/// One-line text encoding of the tree; free with `gwbrw_string_free`.
///
/// # Safety
/// `t` must be a live tree handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_tree_to_line(t: *const GwbrwTree) -> *mut c_char {
    guarded(std::ptr::null_mut(), || match unsafe { t.as_ref() } {
        Some(t) => leak_string(t.0.to_line()),
        None => {
            set_error("t is null");
            std::ptr::null_mut()
        }
    })
}

/// # Safety
/// `t` must come from a tree constructor; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_tree_free(t: *mut GwbrwTree) {
    if !t.is_null() {
        drop(unsafe { Box::from_raw(t) });
    }
}

// ---------------------------------------------------------------------------
// Walks

/// Samples branching random walk labels over the tree: each edge steps +-1
/// with equal probability, and the reflected variant forces +1 out of level
/// zero. The tree handle stays owned by the caller.
///
/// # Safety
/// `t` must be a live tree handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_walk_sample(
    t: *const GwbrwTree,
    reflected: bool,
    seed: u64,
    out: *mut *mut GwbrwWalk,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        let t = require!(t);
        if out.is_null() {
            return fail(GwbrwStatus::NullArgument, "out is null");
        }
        let mut rng = replicate_rng(seed, 0);
        let walk = sample_heights(t.0.clone(), reflected, &mut rng);
        unsafe { *out = Box::into_raw(Box::new(GwbrwWalk(walk))) };
        GwbrwStatus::Ok
    })
}

/// Number of labels (= vertices); 0 on a null handle.
///
/// # Safety
/// `w` must be a live walk handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_walk_len(w: *const GwbrwWalk) -> usize {
    guarded(0, || match unsafe { w.as_ref() } {
        Some(w) => w.0.heights.len(),
        None => {
            set_error("w is null");
            0
        }
    })
}

/// Whether the walk was sampled with reflection at zero.
///
/// # Safety
/// `w` must be a live walk handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_walk_reflected(w: *const GwbrwWalk) -> bool {
    guarded(false, || match unsafe { w.as_ref() } {
        Some(w) => w.0.reflected,
        None => {
            set_error("w is null");
            false
        }
    })
}

/// Copies the labels in depth-first vertex order into `buf`.
///
/// # Safety
/// `w` must be a live walk handle and `buf` must hold `cap >= len` i64s.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_walk_heights(
    w: *const GwbrwWalk,
    buf: *mut i64,
    cap: usize,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        let w = require!(w);
        if buf.is_null() {
            return fail(GwbrwStatus::NullArgument, "buf is null");
        }
        let heights = &w.0.heights;
        if cap < heights.len() {
            return fail(
                GwbrwStatus::InvalidArgument,
                format!("buffer holds {cap} entries, walk has {}", heights.len()),
            );
        }
        unsafe { std::slice::from_raw_parts_mut(buf, heights.len()) }.copy_from_slice(heights);
        GwbrwStatus::Ok
    })
}

/// # Safety
/// `w` must come from `gwbrw_walk_sample`; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_walk_free(w: *mut GwbrwWalk) {
    if !w.is_null() {
        drop(unsafe { Box::from_raw(w) });
    }
}

// ---------------------------------------------------------------------------
// Estimation and experiments

/// Estimates the range-density constant c by the law-of-large-numbers route:
/// mean range size over n of the b-ary walk on conditioned trees of n
/// vertices. Writes the point estimate and its standard error.
///
/// # Safety
/// `d` must be a live distribution handle; `out_c_hat` and `out_stderr`
/// must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_estimate_c_lln(
    d: *const GwbrwDistribution,
    b: u32,
    n: usize,
    replicates: u64,
    seed: u64,
    out_c_hat: *mut f64,
    out_stderr: *mut f64,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        let d = require!(d);
        if out_c_hat.is_null() || out_stderr.is_null() {
            return fail(GwbrwStatus::NullArgument, "out_c_hat or out_stderr is null");
        }
        if b < 2 {
            return fail(GwbrwStatus::InvalidArgument, "b must be at least 2");
        }
        if n == 0 || replicates == 0 {
            return fail(GwbrwStatus::InvalidArgument, "n and replicates must be positive");
        }
        let report = estimate_c_lln(&d.mu, b, n, replicates, seed);
        unsafe {
            *out_c_hat = report.estimate.c_hat;
            *out_stderr = report.estimate.stderr;
        }
        GwbrwStatus::Ok
    })
}

/// Runs one experiment to completion. `name` is one of the CLI experiment
/// names ("exact-checks", "lln", "estimate-c", "convergence", "marginal-ks",
/// "coupling-check", "scc-invariance", "snake-demo"); `config_json` is an
/// optional configuration document (null or empty means defaults), with
/// missing fields filled per experiment; `seed` overrides the configured
/// master seed when `override_seed` is true. Replicates run on the global
/// worker pool; results do not depend on its size.
///
/// # Safety
/// `name` must be a valid NUL-terminated string, `config_json` likewise or
/// null, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_experiment_run(
    name: *const c_char,
    config_json: *const c_char,
    override_seed: bool,
    seed: u64,
    out: *mut *mut GwbrwReport,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        if name.is_null() || out.is_null() {
            return fail(GwbrwStatus::NullArgument, "name or out is null");
        }
        let name = match unsafe { CStr::from_ptr(name) }.to_str() {
            Ok(s) => s,
            Err(e) => return fail(GwbrwStatus::InvalidUtf8, e),
        };
        let mut cfg = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            let text = match unsafe { CStr::from_ptr(config_json) }.to_str() {
                Ok(s) => s,
                Err(e) => return fail(GwbrwStatus::InvalidUtf8, e),
            };
            if text.trim().is_empty() {
                ExperimentConfig::default()
            } else {
                match serde_json::from_str(text) {
                    Ok(cfg) => cfg,
                    Err(e) => return fail(GwbrwStatus::Config, format!("parsing config: {e}")),
                }
            }
        };
        if let Err(e) = cfg.apply_experiment_defaults(name) {
            return fail(cli_status(&e), e);
        }
        if override_seed {
            cfg.seed = seed;
        }
        match run_experiment(&cfg) {
            Ok(output) => {
                let meta = RunMeta {
                    seed: cfg.seed,
                    config_hash: cfg.hash(),
                };
                unsafe { *out = Box::into_raw(Box::new(GwbrwReport { output, meta })) };
                GwbrwStatus::Ok
            }
            Err(e) => fail(cli_status(&e), e),
        }
    })
}

/// Whether every asserted row passed; false on a null handle.
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_report_all_pass(r: *const GwbrwReport) -> bool {
    guarded(false, || match unsafe { r.as_ref() } {
        Some(r) => r.output.report().all_pass(),
        None => {
            set_error("r is null");
            false
        }
    })
}

/// Number of report rows; 0 on a null handle.
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_report_row_count(r: *const GwbrwReport) -> usize {
    guarded(0, || match unsafe { r.as_ref() } {
        Some(r) => r.output.report().rows.len(),
        None => {
            set_error("r is null");
            0
        }
    })
}

/// Statistic name of row `i`; free with `gwbrw_string_free`. Null when `i`
/// is out of range.
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_report_row_statistic(
    r: *const GwbrwReport,
    i: usize,
) -> *mut c_char {
    guarded(std::ptr::null_mut(), || match unsafe { r.as_ref() } {
        Some(r) => match r.output.report().rows.get(i) {
            Some(row) => leak_string(row.statistic.clone()),
            None => {
                set_error(format!("row {i} out of range"));
                std::ptr::null_mut()
            }
        },
        None => {
            set_error("r is null");
            std::ptr::null_mut()
        }
    })
}

/// Numeric value of row `i`.
///
/// # Safety
/// `r` must be a live report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_report_row_value(
    r: *const GwbrwReport,
    i: usize,
    out: *mut f64,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        let r = require!(r);
        if out.is_null() {
            return fail(GwbrwStatus::NullArgument, "out is null");
        }
        match r.output.report().rows.get(i) {
            Some(row) => {
                unsafe { *out = row.value };
                GwbrwStatus::Ok
            }
            None => fail(GwbrwStatus::InvalidArgument, format!("row {i} out of range")),
        }
    })
}

/// Pass state of row `i`: 1 passed, 0 failed, -1 informational.
///
/// # Safety
/// `r` must be a live report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_report_row_passed(
    r: *const GwbrwReport,
    i: usize,
    out: *mut i32,
) -> GwbrwStatus {
    guarded(GwbrwStatus::Panic, || {
        let r = require!(r);
        if out.is_null() {
            return fail(GwbrwStatus::NullArgument, "out is null");
        }
        match r.output.report().rows.get(i) {
            Some(row) => {
                unsafe {
                    *out = match row.pass {
                        Some(true) => 1,
                        Some(false) => 0,
                        None => -1,
                    }
                };
                GwbrwStatus::Ok
            }
            None => fail(GwbrwStatus::InvalidArgument, format!("row {i} out of range")),
        }
    })
}

/// Serializes the full run artifact (identical to the CLI output for the
/// same config and seed); free with `gwbrw_string_free`.
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_report_render(
    r: *const GwbrwReport,
    format: GwbrwFormat,
) -> *mut c_char {
    guarded(std::ptr::null_mut(), || match unsafe { r.as_ref() } {
        Some(r) => {
            let fmt = match format {
                GwbrwFormat::Csv => OutputFormat::Csv,
                GwbrwFormat::Ndjson => OutputFormat::Ndjson,
            };
            leak_string(gwbrw::experiments_cli::render_output(&r.output, fmt, &r.meta))
        }
        None => {
            set_error("r is null");
            std::ptr::null_mut()
        }
    })
}

/// # Safety
/// `r` must come from `gwbrw_experiment_run`; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn gwbrw_report_free(r: *mut GwbrwReport) {
    if !r.is_null() {
        drop(unsafe { Box::from_raw(r) });
    }
}
