//! C ABI over the degenhom engine.
//!
//! Objects are opaque handles created by `dh_*_new*`/`dh_*_from_json` and
//! released by the matching `dh_*_free`. Every fallible call returns a
//! [`DhStatus`]; the message of the last failure on the calling thread is
//! available from [`dh_last_error`]. Panics are caught at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use degenhom::cli::{self, Command, ExperimentConfig};
use degenhom::environment::EnvironmentSpec;
use degenhom::homogenize::{m_f, whom_k};
use degenhom::inequalities::iid_mu;
use degenhom::lattice::{Lattice, LatticeSpec, Region};
use degenhom::potentials::{Potential, PotentialSpec};
use degenhom::solver::SolverConfig;
use degenhom::Error;

/// Status codes; the nonzero values match the CLI exit codes where they
/// overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DhStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or an out-of-range argument.
    InvalidArgument = 1,
    /// Rejected spec or configuration.
    InvalidConfig = 2,
    /// Solver or I/O failure.
    Numerical = 3,
    /// A property check failed.
    CheckFailed = 4,
    /// A panic was caught.
    Panic = 5,
}

pub struct DhLattice(Lattice);
/// Environment spec and the edge count of the lattice it was checked against.
pub struct DhEnvironment(EnvironmentSpec, usize);
pub struct DhPotential(Potential);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn status_of(e: &Error) -> DhStatus {
    match e {
        Error::NoConvergence { .. } | Error::NullSpace | Error::TooLarge(_) | Error::Io(_) => DhStatus::Numerical,
        Error::BoundViolated(_) | Error::EnvelopeViolated { .. } => DhStatus::CheckFailed,
        _ => DhStatus::InvalidConfig,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (DhStatus, String)>) -> DhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DhStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic in degenhom");
            DhStatus::Panic
        }
    }
}

fn engine(e: Error) -> (DhStatus, String) {
    (status_of(&e), e.to_string())
}

fn bad(msg: &str) -> (DhStatus, String) {
    (DhStatus::InvalidArgument, msg.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DhStatus, String)> {
    if p.is_null() {
        return Err(bad(&format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| bad(&format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (DhStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(bad(&format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, (DhStatus, String)> {
    p.as_ref().ok_or_else(|| bad(&format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), (DhStatus, String)> {
    if out.is_null() {
        return Err(bad("output pointer is null"));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Built-in lattice: `name` is one of "zd-nn", "zd-range2", "zd-diag",
/// "kagome".
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dh_lattice_new_preset(name: *const c_char, d: usize, n: usize, out: *mut *mut DhLattice) -> DhStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let lat = LatticeSpec::preset(name, d, n).and_then(Lattice::new).map_err(engine)?;
        write_out(out, Box::into_raw(Box::new(DhLattice(lat))))
    })
}

/// Lattice from a JSON lattice spec.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dh_lattice_from_json(json: *const c_char, out: *mut *mut DhLattice) -> DhStatus {
    guard(|| {
        let lat = LatticeSpec::from_json(str_arg(json, "json")?).and_then(Lattice::new).map_err(engine)?;
        write_out(out, Box::into_raw(Box::new(DhLattice(lat))))
    })
}

/// Interaction range R.
///
/// # Safety
/// `lattice` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dh_lattice_range(lattice: *const DhLattice, out: *mut f64) -> DhStatus {
    guard(|| write_out(out, ref_arg(lattice, "lattice")?.0.range()))
}

/// Number of generating edges.
///
/// # Safety
/// `lattice` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dh_lattice_num_edges(lattice: *const DhLattice, out: *mut usize) -> DhStatus {
    guard(|| write_out(out, ref_arg(lattice, "lattice")?.0.num_edges()))
}

/// # Safety
/// `lattice` must come from this library or be null; it is invalid after
/// the call.
#[no_mangle]
pub unsafe extern "C" fn dh_lattice_free(lattice: *mut DhLattice) {
    if !lattice.is_null() {
        drop(Box::from_raw(lattice));
    }
}

/// Environment from a JSON environment spec (validated against `lattice`).
///
/// # Safety
/// Pointers must be valid; `json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dh_environment_from_json(
    lattice: *const DhLattice,
    json: *const c_char,
    out: *mut *mut DhEnvironment,
) -> DhStatus {
    guard(|| {
        let lat = ref_arg(lattice, "lattice")?;
        let spec: EnvironmentSpec =
            serde_json::from_str(str_arg(json, "json")?).map_err(|e| (DhStatus::InvalidConfig, e.to_string()))?;
        spec.validate(&lat.0).map_err(engine)?;
        write_out(out, Box::into_raw(Box::new(DhEnvironment(spec, lat.0.num_edges()))))
    })
}

/// λ_b(τ_z ω_s) for realization `sample`; `z` has `d` entries.
///
/// # Safety
/// `env` must come from this library; `z` must hold `d` values.
#[no_mangle]
pub unsafe extern "C" fn dh_environment_weight(
    env: *const DhEnvironment,
    sample: u64,
    z: *const i64,
    d: usize,
    b: usize,
    out: *mut f64,
) -> DhStatus {
    guard(|| {
        let env = ref_arg(env, "environment")?;
        let z = slice_arg(z, d, "z")?;
        if b >= env.1 || d < 2 {
            return Err(bad("edge index or dimension out of range"));
        }
        write_out(out, env.0.sample(sample).weight(z, b))
    })
}

/// # Safety
/// `env` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dh_environment_free(env: *mut DhEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Potential from a JSON potential spec.
///
/// # Safety
/// `json` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dh_potential_from_json(json: *const c_char, out: *mut *mut DhPotential) -> DhStatus {
    guard(|| {
        let spec: PotentialSpec =
            serde_json::from_str(str_arg(json, "json")?).map_err(|e| (DhStatus::InvalidConfig, e.to_string()))?;
        let pot = spec.build().map_err(engine)?;
        write_out(out, Box::into_raw(Box::new(DhPotential(pot))))
    })
}

/// V(λ; r) with r of length `n`.
///
/// # Safety
/// `pot` must come from this library; `r` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn dh_potential_eval(
    pot: *const DhPotential,
    lambda: f64,
    r: *const f64,
    n: usize,
    out: *mut f64,
) -> DhStatus {
    guard(|| {
        let pot = ref_arg(pot, "potential")?;
        write_out(out, pot.0.eval(lambda, slice_arg(r, n, "r")?))
    })
}

/// # Safety
/// `pot` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dh_potential_free(pot: *mut DhPotential) {
    if !pot.is_null() {
        drop(Box::from_raw(pot));
    }
}

/// W_hom^(k)(ω_s; F) with default solver settings; F is n×d row-major.
///
/// # Safety
/// Handles must come from this library; `f` must hold `f_len` values.
#[no_mangle]
pub unsafe extern "C" fn dh_whom_k(
    lattice: *const DhLattice,
    env: *const DhEnvironment,
    pot: *const DhPotential,
    sample: u64,
    f: *const f64,
    f_len: usize,
    k: u32,
    out: *mut f64,
) -> DhStatus {
    guard(|| {
        let (lat, env, pot) = (ref_arg(lattice, "lattice")?, ref_arg(env, "environment")?, ref_arg(pot, "potential")?);
        let f = slice_arg(f, f_len, "F")?;
        if f.len() != lat.0.n() * lat.0.d() {
            return Err(bad("F must have n·d entries"));
        }
        let r = whom_k(&lat.0, &env.0.sample(sample), &pot.0, f, k, &SolverConfig::default(), None).map_err(engine)?;
        write_out(out, r.value)
    })
}

/// m_F(ω_s; kY)/kᵈ, the Dirichlet cell problem on [0, k)ᵈ.
///
/// # Safety
/// Handles must come from this library; `f` must hold `f_len` values.
#[no_mangle]
pub unsafe extern "C" fn dh_m_f(
    lattice: *const DhLattice,
    env: *const DhEnvironment,
    pot: *const DhPotential,
    sample: u64,
    f: *const f64,
    f_len: usize,
    k: u32,
    out: *mut f64,
) -> DhStatus {
    guard(|| {
        let (lat, env, pot) = (ref_arg(lattice, "lattice")?, ref_arg(env, "environment")?, ref_arg(pot, "potential")?);
        let f = slice_arg(f, f_len, "F")?;
        if f.len() != lat.0.n() * lat.0.d() {
            return Err(bad("F must have n·d entries"));
        }
        let region = Region::cube(lat.0.d(), 0.0, k as f64);
        let r = m_f(&lat.0, &env.0.sample(sample), &pot.0, f, &region, &SolverConfig::default()).map_err(engine)?;
        write_out(out, r.value)
    })
}

/// Path weight μ(ω_s; [z, z + e_i]) on the hyper-cubic lattice.
///
/// # Safety
/// Handles must come from this library; `z` must hold `d` values.
#[no_mangle]
pub unsafe extern "C" fn dh_iid_mu(
    lattice: *const DhLattice,
    env: *const DhEnvironment,
    sample: u64,
    z: *const i64,
    d: usize,
    i: usize,
    p: f64,
    out: *mut f64,
) -> DhStatus {
    guard(|| {
        let (lat, env) = (ref_arg(lattice, "lattice")?, ref_arg(env, "environment")?);
        let z = slice_arg(z, d, "z")?;
        let pw = iid_mu(&lat.0, &env.0.sample(sample), z, i, p).map_err(engine)?;
        write_out(out, pw.mu)
    })
}

/// Runs a CLI command (e.g. "moments") on a JSON config, writing outputs
/// to `out_dir`. The status mirrors the CLI exit code.
///
/// # Safety
/// All three strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dh_run(command: *const c_char, config_json: *const c_char, out_dir: *const c_char) -> DhStatus {
    guard(|| {
        let name = str_arg(command, "command")?;
        let command = Command::from_name(name).ok_or_else(|| bad("unknown command"))?;
        let cfg = ExperimentConfig::from_json(str_arg(config_json, "config")?).map_err(engine)?;
        let seed = cfg.seed;
        let cfg = cfg.with_seed(seed);
        let dir = str_arg(out_dir, "out_dir")?;
        cli::run(command, &cfg, Path::new(dir)).map_err(|e| {
            let status = match e.exit_code() {
                3 => DhStatus::Numerical,
                4 => DhStatus::CheckFailed,
                _ => DhStatus::InvalidConfig,
            };
            (status, e.to_string())
        })
    })
}
