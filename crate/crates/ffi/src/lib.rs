//! C ABI over `rac-core`.
//!
//! Every fallible call returns a [`RacStatus`]; on failure the message is
//! available from [`rac_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rac_core::counting::{count_sts, design_divisibility};
use rac_core::pipeline::{decompose, DecompositionResult, Mode, PipelineConfig};
use rac_core::{verify_decomposition, Error, Graph, Matching, Triple};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotTridivisible = 3,
    /// A randomized stage gave up; the result handle (if any) names the stage.
    StageAbort = 4,
    Parse = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RacMode {
    Paper = 0,
    Dense = 1,
    Punctured = 2,
}

/// Pipeline parameters; obtain defaults from [`rac_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RacConfig {
    pub mode: RacMode,
    /// Fraction of template triangles removed in punctured mode.
    pub epsilon: f64,
    pub seed: u64,
    pub max_retries: u32,
    pub budget: u32,
    pub c: f64,
}

/// Opaque graph.
pub struct RacGraph(Graph);

/// Opaque pipeline result.
pub struct RacResult {
    result: DecompositionResult,
    flat: Vec<u32>,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).expect("nul removed"));
}

fn status_of(e: &Error) -> RacStatus {
    match e {
        Error::NotTridivisible(_) => RacStatus::NotTridivisible,
        Error::StageAbort { .. } => RacStatus::StageAbort,
        Error::Parse { .. } => RacStatus::Parse,
        Error::InternalConsistency(_) => RacStatus::Internal,
        _ => RacStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), RacStatus>) -> RacStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RacStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside rac");
            RacStatus::Panic
        }
    }
}

fn fail(e: Error) -> RacStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn nonnull<T>(p: *const T, what: &str) -> Result<(), RacStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(RacStatus::NullPointer);
    }
    Ok(())
}

/// Message of the last failure on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rac_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn rac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[no_mangle]
pub extern "C" fn rac_config_default() -> RacConfig {
    let d = PipelineConfig::default();
    RacConfig {
        mode: RacMode::Dense,
        epsilon: 0.0,
        seed: d.seed,
        max_retries: d.max_retries as u32,
        budget: d.budget as u32,
        c: d.c,
    }
}

/// Empty graph on `n` vertices.
#[no_mangle]
pub extern "C" fn rac_graph_new(n: usize) -> *mut RacGraph {
    Box::into_raw(Box::new(RacGraph(Graph::new(n))))
}

#[no_mangle]
pub extern "C" fn rac_graph_complete(n: usize) -> *mut RacGraph {
    match catch_unwind(|| Graph::complete(n)) {
        Ok(g) => Box::into_raw(Box::new(RacGraph(g))),
        Err(_) => {
            set_error("panic inside rac");
            ptr::null_mut()
        }
    }
}

/// Parses the `n m` / `u v` edge-list text format.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rac_graph_parse(text: *const c_char, out: *mut *mut RacGraph) -> RacStatus {
    guard(|| {
        nonnull(text, "text")?;
        nonnull(out, "out")?;
        let s = CStr::from_ptr(text).to_str().map_err(|_| {
            set_error("graph text is not UTF-8");
            RacStatus::Parse
        })?;
        let g = Graph::parse(s).map_err(fail)?;
        *out = Box::into_raw(Box::new(RacGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rac_graph_free(g: *mut RacGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Adds `uv`; adding an existing edge is not an error.
///
/// # Safety
/// `g` must be a valid graph handle.
#[no_mangle]
pub unsafe extern "C" fn rac_graph_add_edge(g: *mut RacGraph, u: u32, v: u32) -> RacStatus {
    guard(|| {
        nonnull(g, "graph")?;
        (*g).0.add_edge(u, v).map(|_| ()).map_err(fail)
    })
}

/// # Safety
/// `g` must be a valid graph handle.
#[no_mangle]
pub unsafe extern "C" fn rac_graph_vertex_count(g: *const RacGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `g` must be a valid graph handle.
#[no_mangle]
pub unsafe extern "C" fn rac_graph_edge_count(g: *const RacGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// # Safety
/// `g` must be a valid graph handle.
#[no_mangle]
pub unsafe extern "C" fn rac_graph_is_tridivisible(g: *const RacGraph) -> bool {
    g.as_ref().is_some_and(|g| g.0.is_tridivisible())
}

/// Runs the pipeline. On `RAC_STATUS_OK` and `RAC_STATUS_STAGE_ABORT` a
/// result handle is stored in `out`; on other failures `out` is untouched.
///
/// # Safety
/// `g`, `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rac_decompose(
    g: *const RacGraph,
    cfg: *const RacConfig,
    out: *mut *mut RacResult,
) -> RacStatus {
    guard(|| {
        nonnull(g, "graph")?;
        nonnull(cfg, "config")?;
        nonnull(out, "out")?;
        let c = &*cfg;
        let mode = match c.mode {
            RacMode::Paper => Mode::Paper,
            RacMode::Dense => Mode::Dense,
            RacMode::Punctured => Mode::Punctured(c.epsilon),
        };
        let pc = PipelineConfig {
            c: c.c,
            max_retries: c.max_retries as usize,
            budget: c.budget as usize,
            ..PipelineConfig::new(mode, c.seed)
        };
        let result = decompose(&(*g).0, &pc).map_err(fail)?;
        let flat = result
            .decomposition
            .iter()
            .flatten()
            .flat_map(|t| t.iter().copied())
            .collect();
        let json = CString::new(serde_json::to_string(&result).expect("result serializes")).expect("no NUL in JSON");
        let ok = result.is_ok();
        if !ok {
            let f = result.failure.as_ref().expect("abort has a failure");
            set_error(format!("{} stage aborted at step {}: {}", f.stage, f.step, f.detail));
        }
        *out = Box::into_raw(Box::new(RacResult { result, flat, json }));
        if ok {
            Ok(())
        } else {
            Err(RacStatus::StageAbort)
        }
    })
}

/// # Safety
/// `r` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rac_result_free(r: *mut RacResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// True when the run produced a verified decomposition.
///
/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn rac_result_ok(r: *const RacResult) -> bool {
    r.as_ref().is_some_and(|r| r.result.is_ok())
}

/// Number of triangles in the decomposition (0 after an abort).
///
/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn rac_result_triangle_count(r: *const RacResult) -> usize {
    r.as_ref().map_or(0, |r| r.flat.len() / 3)
}

/// Copies up to `cap` triangles as consecutive vertex triples into `buf`
/// (which holds `3 * cap` entries) and returns the number copied.
///
/// # Safety
/// `r` must be a valid result handle and `buf` valid for `3 * cap` writes.
#[no_mangle]
pub unsafe extern "C" fn rac_result_triangles(r: *const RacResult, buf: *mut u32, cap: usize) -> usize {
    let Some(r) = r.as_ref() else { return 0 };
    if buf.is_null() {
        return 0;
    }
    let k = cap.min(r.flat.len() / 3);
    ptr::copy_nonoverlapping(r.flat.as_ptr(), buf, 3 * k);
    k
}

/// The full result as JSON, owned by the handle.
///
/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn rac_result_json(r: *const RacResult) -> *const c_char {
    r.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Checks that `count` triangles (`3 * count` vertex ids) partition the edges of `g`.
///
/// # Safety
/// `g` and `out` must be valid; `tris` must hold `3 * count` entries.
#[no_mangle]
pub unsafe extern "C" fn rac_verify_decomposition(
    g: *const RacGraph,
    tris: *const u32,
    count: usize,
    out: *mut bool,
) -> RacStatus {
    guard(|| {
        nonnull(g, "graph")?;
        nonnull(out, "out")?;
        if count > 0 {
            nonnull(tris, "triangles")?;
        }
        let flat: &[u32] = if count == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(tris, 3 * count)
        };
        let mut ts: Vec<Triple> = Vec::with_capacity(count);
        for c in flat.chunks_exact(3) {
            let mut t = [c[0], c[1], c[2]];
            t.sort_unstable();
            ts.push(t);
        }
        *out = match Matching::from_triangles(ts) {
            Ok(m) => verify_decomposition(&(*g).0, &m),
            Err(_) => false,
        };
        Ok(())
    })
}

/// Exact count of Steiner triple systems on `n` labelled points
/// (`allow_large` unlocks `9 < n <= 15`).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rac_count_sts(n: usize, allow_large: bool, out: *mut u64) -> RacStatus {
    guard(|| {
        nonnull(out, "out")?;
        let c = count_sts(n, allow_large).map_err(fail)?;
        *out = u64::try_from(&c).map_err(|_| {
            set_error(format!("count {c} does not fit in 64 bits"));
            RacStatus::InvalidArgument
        })?;
        Ok(())
    })
}

/// Divisibility conditions for `(n, q, r, lambda)` designs.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rac_design_divisibility(n: u64, q: u64, r: u64, lambda: u64, out: *mut bool) -> RacStatus {
    guard(|| {
        nonnull(out, "out")?;
        *out = design_divisibility(n, q, r, lambda).map_err(fail)?;
        Ok(())
    })
}
