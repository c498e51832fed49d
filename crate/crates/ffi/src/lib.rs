//! C interface to qdtrace.
//!
//! Scenarios and runs are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`QdStatus`]; on failure [`qd_last_error`] describes what went wrong on
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qdtrace::cli::{execute, RunOutput};
use qdtrace::metrics::{self, TimeSeries};
use qdtrace::qd::{Mpc, MpcKind};
use qdtrace::raytracer::predicted_tuple_count;
use qdtrace::{presets, Error, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Trace = 6,
    Outage = 7,
    Metric = 8,
    OutOfRange = 9,
    Panic = 10,
}

/// Loaded scenario: configuration, mesh and materials.
pub struct QdScenario {
    inner: Scenario,
}

/// Channel instances and link samples of one scenario run.
pub struct QdRun {
    out: RunOutput,
    digest: String,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdMpcKind {
    Main = 0,
    Pre = 1,
    Post = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QdMpc {
    pub kind: QdMpcKind,
    pub delay_s: f64,
    pub gain_db: f64,
    pub aod_az: f64,
    pub aod_el: f64,
    pub aoa_az: f64,
    pub aoa_el: f64,
    pub phase_rad: f64,
    pub parent: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QdInstanceInfo {
    pub timestep: usize,
    /// Index of the transmitter among the scenario nodes.
    pub tx_node: usize,
    /// Index of the receiver among the scenario nodes.
    pub rx_node: usize,
    pub n_mpcs: usize,
    pub tuples_visited: u64,
    pub geometric_ops: u64,
    pub obstruction_checks: u64,
    pub check_budget: u64,
}

/// One receiver at one timestep; NaN powers mark an outage.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QdLinkSample {
    pub timestep: usize,
    pub time_s: f64,
    pub rx_node: usize,
    pub n_mpcs: usize,
    pub rx_power_dbm: f64,
    pub snr_db: f64,
    pub sinr_db: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: QdStatus, msg: impl Into<String>) -> QdStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> QdStatus {
    let status = match &e {
        Error::DegenerateTriangle { .. } | Error::Config(_) => QdStatus::Config,
        Error::Parse { .. } => QdStatus::Parse,
        Error::Trace { .. } => QdStatus::Trace,
        Error::Outage => QdStatus::Outage,
        Error::Metric(_) => QdStatus::Metric,
        Error::Io(_) => QdStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> QdStatus) -> QdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == QdStatus::Ok {
                set_error(String::new());
            }
            s
        }
        Err(_) => fail(QdStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, QdStatus> {
    if p.is_null() {
        return Err(fail(QdStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(QdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! deref {
    ($p:expr, $what:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(QdStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $what:expr) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(QdStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next qdtrace call on this thread.
#[no_mangle]
pub extern "C" fn qd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a scenario file; mesh and material paths resolve relative to it.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_load(path: *const c_char, out: *mut *mut QdScenario) -> QdStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let path = tri!(str_arg(path, "path"));
        match Scenario::load(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(QdScenario { inner }));
                QdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Builds one of the built-in scenarios ("indoor1", "l_room", "courtyard").
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_preset(name: *const c_char, out: *mut *mut QdScenario) -> QdStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let name = tri!(str_arg(name, "name"));
        match presets::by_name(name).and_then(|p| p.scenario()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(QdScenario { inner }));
                QdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `scn` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_free(scn: *mut QdScenario) {
    if !scn.is_null() {
        drop(Box::from_raw(scn));
    }
}

unsafe fn update(scn: *mut QdScenario, f: impl FnOnce(&mut qdtrace::ScenarioConfig)) -> QdStatus {
    guard(|| {
        let scn = deref_mut!(scn, "scenario");
        let mut cfg = scn.inner.config.clone();
        f(&mut cfg);
        match cfg.validate() {
            Ok(()) => {
                scn.inner.config = cfg;
                QdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets the maximum reflection order. The scenario is unchanged on error.
///
/// # Safety
/// `scn` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_set_max_reflections(scn: *mut QdScenario, max_reflections: usize) -> QdStatus {
    update(scn, |c| c.max_reflections = max_reflections)
}

/// Sets the relative and absolute thresholds in dB; `-INFINITY` disables
/// the relative one.
///
/// # Safety
/// `scn` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_set_thresholds(scn: *mut QdScenario, rel_db: f64, abs_db: f64) -> QdStatus {
    update(scn, |c| {
        c.rel_threshold_db = rel_db;
        c.abs_threshold_db = abs_db;
    })
}

/// # Safety
/// `scn` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_set_steps(scn: *mut QdScenario, steps: usize) -> QdStatus {
    update(scn, |c| c.steps = steps)
}

/// # Safety
/// `scn` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_set_qd(scn: *mut QdScenario, enabled: bool) -> QdStatus {
    update(scn, |c| c.qd = enabled)
}

/// # Safety
/// `scn` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_set_seed(scn: *mut QdScenario, seed: u64) -> QdStatus {
    update(scn, |c| c.seed = seed)
}

/// Number of triangles in the scenario mesh, or 0 for a null handle.
///
/// # Safety
/// `scn` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_triangle_count(scn: *const QdScenario) -> usize {
    scn.as_ref().map_or(0, |s| s.inner.mesh.len())
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `scn` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_node_count(scn: *const QdScenario) -> usize {
    scn.as_ref().map_or(0, |s| s.inner.config.nodes.len())
}

/// Copies the id of node `index` into `buf` (NUL-terminated, truncated to
/// `len`) and stores the full id length in `needed` when non-null.
///
/// # Safety
/// `scn` must be a valid handle and `buf` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_node_id(
    scn: *const QdScenario,
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> QdStatus {
    guard(|| {
        let scn = deref!(scn, "scenario");
        let Some(node) = scn.inner.config.nodes.get(index) else {
            return fail(QdStatus::OutOfRange, format!("node {index} out of range"));
        };
        let id = node.id.as_bytes();
        if !needed.is_null() {
            *needed = id.len();
        }
        if len > 0 {
            if buf.is_null() {
                return fail(QdStatus::NullPointer, "buf is null");
            }
            let n = id.len().min(len - 1);
            ptr::copy_nonoverlapping(id.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        QdStatus::Ok
    })
}

/// Hex SHA-256 digest of the configuration, mesh and materials, written like
/// [`qd_scenario_node_id`].
///
/// # Safety
/// `scn` must be a valid handle and `buf` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_digest(scn: *const QdScenario, buf: *mut c_char, len: usize) -> QdStatus {
    guard(|| {
        let scn = deref!(scn, "scenario");
        let d = scn.inner.digest();
        if buf.is_null() || len <= d.len() {
            return fail(QdStatus::InvalidArgument, format!("digest needs {} bytes", d.len() + 1));
        }
        ptr::copy_nonoverlapping(d.as_ptr().cast(), buf, d.len());
        *buf.add(d.len()) = 0;
        QdStatus::Ok
    })
}

/// Traces every (timestep, tx, rx) instance and evaluates all links.
/// `jobs` is the worker count, 0 for all cores; results do not depend on it.
///
/// # Safety
/// `scn` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_run(scn: *const QdScenario, jobs: usize, out: *mut *mut QdRun) -> QdStatus {
    guard(|| {
        let scn = deref!(scn, "scenario");
        let out = deref_mut!(out, "out");
        match execute(&scn.inner, jobs) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(QdRun { out: r, digest: scn.inner.digest() }));
                QdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `run` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qd_run_free(run: *mut QdRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn qd_run_instance_count(run: *const QdRun) -> usize {
    run.as_ref().map_or(0, |r| r.out.instances.len())
}

/// # Safety
/// `run` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn qd_run_sample_count(run: *const QdRun) -> usize {
    run.as_ref().map_or(0, |r| r.out.samples.len())
}

/// Ray-tracing and link-evaluation wall times in seconds.
///
/// # Safety
/// `run` must be a valid handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn qd_run_timing(run: *const QdRun, t_rt_s: *mut f64, t_ns_s: *mut f64) -> QdStatus {
    guard(|| {
        let run = deref!(run, "run");
        if let Some(t) = t_rt_s.as_mut() {
            *t = run.out.t_rt_s;
        }
        if let Some(t) = t_ns_s.as_mut() {
            *t = run.out.t_ns_s;
        }
        QdStatus::Ok
    })
}

fn node_index(scn_nodes: &[String], id: &str) -> usize {
    scn_nodes.iter().position(|n| n == id).unwrap_or(usize::MAX)
}

/// # Safety
/// `scn` and `run` must be valid handles, `run` produced from `scn`, and
/// `info` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_run_instance(
    run: *const QdRun,
    scn: *const QdScenario,
    index: usize,
    info: *mut QdInstanceInfo,
) -> QdStatus {
    guard(|| {
        let run = deref!(run, "run");
        let scn = deref!(scn, "scenario");
        let info = deref_mut!(info, "info");
        let Some(inst) = run.out.instances.get(index) else {
            return fail(QdStatus::OutOfRange, format!("instance {index} out of range"));
        };
        let ids: Vec<String> = scn.inner.config.nodes.iter().map(|n| n.id.clone()).collect();
        *info = QdInstanceInfo {
            timestep: inst.timestep,
            tx_node: node_index(&ids, &inst.tx_id),
            rx_node: node_index(&ids, &inst.rx_id),
            n_mpcs: inst.mpcs.len(),
            tuples_visited: inst.counters.tuples_visited,
            geometric_ops: inst.counters.geometric_ops,
            obstruction_checks: inst.counters.obstruction_checks,
            check_budget: inst.counters.check_budget,
        };
        QdStatus::Ok
    })
}

fn mpc_to_c(m: &Mpc) -> QdMpc {
    QdMpc {
        kind: match m.kind {
            MpcKind::MainCursor => QdMpcKind::Main,
            MpcKind::PreCursor => QdMpcKind::Pre,
            MpcKind::PostCursor => QdMpcKind::Post,
        },
        delay_s: m.delay_s,
        gain_db: m.gain_db,
        aod_az: m.aod.az,
        aod_el: m.aod.el,
        aoa_az: m.aoa.az,
        aoa_el: m.aoa.el,
        phase_rad: m.phase_rad,
        parent: m.parent,
    }
}

/// MPC `k` of instance `index`.
///
/// # Safety
/// `run` must be a valid handle and `mpc` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_run_mpc(run: *const QdRun, index: usize, k: usize, mpc: *mut QdMpc) -> QdStatus {
    guard(|| {
        let run = deref!(run, "run");
        let mpc = deref_mut!(mpc, "mpc");
        match run.out.instances.get(index).and_then(|i| i.mpcs.get(k)) {
            Some(m) => {
                *mpc = mpc_to_c(m);
                QdStatus::Ok
            }
            None => fail(QdStatus::OutOfRange, format!("MPC {k} of instance {index} out of range")),
        }
    })
}

/// # Safety
/// `scn` and `run` must be valid handles, `run` produced from `scn`, and
/// `sample` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_run_sample(
    run: *const QdRun,
    scn: *const QdScenario,
    index: usize,
    sample: *mut QdLinkSample,
) -> QdStatus {
    guard(|| {
        let run = deref!(run, "run");
        let scn = deref!(scn, "scenario");
        let sample = deref_mut!(sample, "sample");
        let Some(s) = run.out.samples.get(index) else {
            return fail(QdStatus::OutOfRange, format!("sample {index} out of range"));
        };
        let ids: Vec<String> = scn.inner.config.nodes.iter().map(|n| n.id.clone()).collect();
        *sample = QdLinkSample {
            timestep: s.timestep,
            time_s: s.time_s,
            rx_node: node_index(&ids, &s.rx_id),
            n_mpcs: s.n_mpcs,
            rx_power_dbm: s.rx_power_dbm,
            snr_db: s.snr_db,
            sinr_db: s.sinr_db,
        };
        QdStatus::Ok
    })
}

/// Writes the run's channel trace. The file is replaced only on success.
///
/// # Safety
/// `run` must be a valid handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qd_run_write_trace(run: *const QdRun, path: *const c_char) -> QdStatus {
    guard(|| {
        let run = deref!(run, "run");
        let path = Path::new(tri!(str_arg(path, "path")));
        let Some(name) = path.file_name() else {
            return fail(QdStatus::InvalidArgument, "path has no file name");
        };
        let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
        let res = (|| -> qdtrace::Result<()> {
            let mut w = BufWriter::new(File::create(&tmp)?);
            qdtrace::trace::write_trace(&mut w, &run.digest, &run.out.instances)?;
            w.flush()?;
            drop(w);
            std::fs::rename(&tmp, path)?;
            Ok(())
        })();
        match res {
            Ok(()) => QdStatus::Ok,
            Err(e) => {
                let _ = std::fs::remove_file(&tmp);
                from_error(e)
            }
        }
    })
}

/// Size of a reflection tree: `1 + sum_{r=1..R} T (T-1)^(r-1)`, saturating.
#[no_mangle]
pub extern "C" fn qd_predicted_tuple_count(triangles: u64, max_order: usize) -> u64 {
    predicted_tuple_count(triangles, max_order)
}

/// Runtime speedup of a simplified over a baseline configuration.
#[no_mangle]
pub extern "C" fn qd_speedup(t_rt_base: f64, t_ns_base: f64, t_rt_simp: f64, t_ns_simp: f64, n_runs: f64) -> f64 {
    metrics::speedup(t_rt_base, t_ns_base, t_rt_simp, t_ns_simp, n_runs)
}

/// NRMSE of `simplified` against `baseline` on the shared time grid `t`,
/// all of length `n`.
///
/// # Safety
/// The three arrays must hold `n` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_nrmse(
    t: *const f64,
    baseline: *const f64,
    simplified: *const f64,
    n: usize,
    out: *mut f64,
) -> QdStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        if t.is_null() || baseline.is_null() || simplified.is_null() {
            return fail(QdStatus::NullPointer, "input array is null");
        }
        let t = std::slice::from_raw_parts(t, n).to_vec();
        let series = |p: *const f64| TimeSeries::new(t.clone(), std::slice::from_raw_parts(p, n).to_vec());
        let res = series(baseline).and_then(|b| series(simplified).and_then(|s| metrics::nrmse(&s, &b)));
        match res {
            Ok(v) => {
                *out = v;
                QdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
