//! C ABI for the simulator.
//!
//! The surface mirrors the command line: load a built-in experiment or a
//! TOML file into an opaque configuration handle, adjust it with setters,
//! and run it to a directory of CSV files. Two plain-data kernels expose
//! conditional steady-state solves for callers that only need populations.
//!
//! Every function returns a status code; `rydsim_last_error` retrieves a
//! human-readable message for the most recent failure on the calling
//! thread. String buffers are filled NUL-terminated and truncated to the
//! given capacity; the return value is the size the full text needs, so a
//! caller can retry with a larger buffer. A generated C header is written
//! to `include/rydsim.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use rydsim::cli::{preset, run_and_write, ExperimentConfig};
use rydsim::engine::SolveCache;
use rydsim::physics::{DriveParams, LevelScheme};

/// Outcome of a C API call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RydsimStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration could not be loaded or failed validation.
    InvalidConfig = 3,
    /// A scalar argument was out of range for the operation.
    InvalidArgument = 4,
    /// The simulation or solve failed; see `rydsim_last_error`.
    RunFailed = 5,
    /// The output buffer is too small for the requested data.
    BufferTooSmall = 6,
    /// An internal invariant was violated (a bug worth reporting).
    Internal = 7,
}

/// Opaque experiment configuration; create with one of the
/// `rydsim_config_*` constructors and release with `rydsim_config_free`.
pub struct RydsimConfig {
    inner: ExperimentConfig,
}

/// Drive and damping parameters of one atom, shared by both solve kernels.
/// `levels` selects the scheme: 2 for a driven two-level atom (the ladder
/// fields `omega23`, `gamma32`, `deph32` must be zero), 3 for the full
/// ladder. Rabi frequencies and rates are angular frequencies in MHz.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RydsimDrive {
    /// Number of levels, 2 or 3.
    pub levels: i32,
    /// Rabi frequency of the lower transition.
    pub omega12: f64,
    /// Rabi frequency of the upper transition (ladder only).
    pub omega23: f64,
    /// Decay rate of level 2 into level 1.
    pub gamma21: f64,
    /// Decay rate of level 3 into level 2 (ladder only).
    pub gamma32: f64,
    /// Extra dephasing rate of the 1-2 coherence.
    pub deph21: f64,
    /// Extra dephasing rate of the 2-3 coherence (ladder only).
    pub deph32: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: RydsimStatus, msg: impl Into<String>) -> RydsimStatus {
    set_error(msg);
    status
}

/// Borrows a C string argument, recording an error on NULL or bad UTF-8.
unsafe fn arg_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, RydsimStatus> {
    if p.is_null() {
        return Err(fail(RydsimStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RydsimStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// Copies `text` into `buf` NUL-terminated, truncating to `cap` bytes, and
/// returns the size the full text needs including the terminator.
unsafe fn copy_str(text: &str, buf: *mut c_char, cap: usize) -> usize {
    let needed = text.len() + 1;
    if buf.is_null() || cap == 0 {
        return needed;
    }
    let n = text.len().min(cap - 1);
    std::ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), n);
    *buf.add(n) = 0;
    needed
}

fn drive_params(drive: &RydsimDrive) -> Result<DriveParams, RydsimStatus> {
    let scheme = match drive.levels {
        2 => LevelScheme::TwoLevel,
        3 => LevelScheme::ThreeLevel,
        n => {
            return Err(fail(
                RydsimStatus::InvalidArgument,
                format!("levels must be 2 or 3, got {n}"),
            ))
        }
    };
    Ok(DriveParams {
        scheme,
        omega12: drive.omega12,
        omega23: drive.omega23,
        delta: 0.0,
        gamma21: drive.gamma21,
        gamma32: drive.gamma32,
        deph21: drive.deph21,
        deph32: drive.deph32,
    })
}

fn guarded(op: impl FnOnce() -> RydsimStatus) -> RydsimStatus {
    match catch_unwind(AssertUnwindSafe(op)) {
        Ok(status) => status,
        Err(_) => fail(RydsimStatus::Internal, "internal panic"),
    }
}

fn config_out(
    out: *mut *mut RydsimConfig,
    built: Result<ExperimentConfig, rydsim::Error>,
) -> RydsimStatus {
    if out.is_null() {
        return fail(RydsimStatus::NullArgument, "out is NULL");
    }
    match built {
        Ok(inner) => {
            let handle = Box::new(RydsimConfig { inner });
            unsafe { *out = Box::into_raw(handle) };
            RydsimStatus::Ok
        }
        Err(e) => fail(RydsimStatus::InvalidConfig, e.to_string()),
    }
}

/// Retrieves the error message of the most recent failing call on this
/// thread. Returns the size the message needs including the terminator;
/// an empty string means no failure has been recorded yet.
#[no_mangle]
pub unsafe extern "C" fn rydsim_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| copy_str(&e.borrow(), buf, cap))
}

/// Writes the library version as a NUL-terminated string; returns the size
/// the full text needs including the terminator.
#[no_mangle]
pub unsafe extern "C" fn rydsim_version(buf: *mut c_char, cap: usize) -> usize {
    copy_str(env!("CARGO_PKG_VERSION"), buf, cap)
}

/// Creates a configuration from a built-in experiment name (list them with
/// the CLI's `presets` subcommand). On success stores a handle in `*out`.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_preset(
    name: *const c_char,
    out: *mut *mut RydsimConfig,
) -> RydsimStatus {
    guarded(|| {
        let name = match arg_str(name, "name") {
            Ok(s) => s,
            Err(status) => return status,
        };
        config_out(out, preset(name))
    })
}

/// Creates a configuration by parsing TOML text.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_from_toml(
    text: *const c_char,
    out: *mut *mut RydsimConfig,
) -> RydsimStatus {
    guarded(|| {
        let text = match arg_str(text, "text") {
            Ok(s) => s,
            Err(status) => return status,
        };
        config_out(out, ExperimentConfig::from_toml_str(text))
    })
}

/// Creates a configuration by reading a TOML file.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_from_toml_file(
    path: *const c_char,
    out: *mut *mut RydsimConfig,
) -> RydsimStatus {
    guarded(|| {
        let path = match arg_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        config_out(out, ExperimentConfig::from_path(std::path::Path::new(path)))
    })
}

/// Releases a configuration handle; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_free(cfg: *mut RydsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn with_config(
    cfg: *mut RydsimConfig,
    edit: impl FnOnce(&mut ExperimentConfig),
) -> RydsimStatus {
    if cfg.is_null() {
        return fail(RydsimStatus::NullArgument, "cfg is NULL");
    }
    edit(&mut (*cfg).inner);
    RydsimStatus::Ok
}

/// Sets the master seed of all random streams.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_seed(
    cfg: *mut RydsimConfig,
    seed: u64,
) -> RydsimStatus {
    with_config(cfg, |c| c.mc.seed = seed)
}

/// Sets the number of independent chains per spatial realization.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_trajectories(
    cfg: *mut RydsimConfig,
    trajectories: u32,
) -> RydsimStatus {
    with_config(cfg, |c| c.mc.trajectories = trajectories)
}

/// Sets the number of spatial realizations per scan point.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_realizations(
    cfg: *mut RydsimConfig,
    realizations: u32,
) -> RydsimStatus {
    with_config(cfg, |c| c.mc.realizations = realizations)
}

/// Sets the worker thread count; 0 restores the default of one per core.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_workers(
    cfg: *mut RydsimConfig,
    workers: usize,
) -> RydsimStatus {
    with_config(cfg, |c| c.workers = (workers > 0).then_some(workers))
}

/// Sets the pair-distance histogram bin width in micrometers.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_bin_width(
    cfg: *mut RydsimConfig,
    bin_width: f64,
) -> RydsimStatus {
    with_config(cfg, |c| c.output.bin_width = bin_width)
}

/// Enables or disables the single-atom baseline (no exact pairs).
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_sare(
    cfg: *mut RydsimConfig,
    sare: bool,
) -> RydsimStatus {
    with_config(cfg, |c| c.partition.sare = sare)
}

/// Sets the lower pair-window bound in micrometers; pairs need a
/// separation above it.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_l_lower(
    cfg: *mut RydsimConfig,
    l_lower: f64,
) -> RydsimStatus {
    with_config(cfg, |c| c.partition.l_lower = Some(l_lower))
}

/// Sets the upper pair-window bound in micrometers; pairs need a
/// separation at or below it.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_l_upper(
    cfg: *mut RydsimConfig,
    l_upper: f64,
) -> RydsimStatus {
    with_config(cfg, |c| c.partition.l_upper = Some(l_upper))
}

/// Enables or disables reuse of steady-state solves for repeated
/// parameter values.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_memoize(
    cfg: *mut RydsimConfig,
    memoize: bool,
) -> RydsimStatus {
    with_config(cfg, |c| c.mc.memoize = memoize)
}

/// Enables or disables writing the sampled atom positions of every
/// realization alongside the results.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_set_dump_positions(
    cfg: *mut RydsimConfig,
    dump: bool,
) -> RydsimStatus {
    with_config(cfg, |c| c.output.dump_positions = dump)
}

/// Serializes the configuration as TOML; same buffer contract as
/// `rydsim_last_error`.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_to_toml(
    cfg: *const RydsimConfig,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> RydsimStatus {
    guarded(|| {
        if cfg.is_null() {
            return fail(RydsimStatus::NullArgument, "cfg is NULL");
        }
        if needed.is_null() {
            return fail(RydsimStatus::NullArgument, "needed is NULL");
        }
        let text = match (*cfg).inner.to_toml() {
            Ok(t) => t,
            Err(e) => return fail(RydsimStatus::InvalidConfig, e.to_string()),
        };
        *needed = copy_str(&text, buf, cap);
        if *needed > cap {
            return fail(RydsimStatus::BufferTooSmall, "buffer too small for TOML text");
        }
        RydsimStatus::Ok
    })
}

/// Validates the configuration and runs it, writing CSV results into
/// `out_dir` (NULL keeps the configured output directory). Blocks until
/// the scan finishes.
#[no_mangle]
pub unsafe extern "C" fn rydsim_config_run(
    cfg: *const RydsimConfig,
    out_dir: *const c_char,
) -> RydsimStatus {
    guarded(|| {
        if cfg.is_null() {
            return fail(RydsimStatus::NullArgument, "cfg is NULL");
        }
        let mut config = (*cfg).inner.clone();
        if !out_dir.is_null() {
            match arg_str(out_dir, "out_dir") {
                Ok(dir) => config.output.dir = PathBuf::from(dir),
                Err(status) => return status,
            }
        }
        if let Err(e) = config.validate() {
            return fail(RydsimStatus::InvalidConfig, e.to_string());
        }
        match run_and_write(&config) {
            Ok(_) => RydsimStatus::Ok,
            Err(e) => fail(RydsimStatus::RunFailed, e.to_string()),
        }
    })
}

/// Steady-state populations of one atom driven at effective detuning
/// `delta_eff` (MHz). Fills `populations[0..levels]` in level order; `len`
/// must be at least `drive->levels`.
#[no_mangle]
pub unsafe extern "C" fn rydsim_steady_single(
    drive: *const RydsimDrive,
    delta_eff: f64,
    populations: *mut f64,
    len: usize,
) -> RydsimStatus {
    guarded(|| {
        if drive.is_null() || populations.is_null() {
            return fail(RydsimStatus::NullArgument, "drive or populations is NULL");
        }
        let params = match drive_params(&*drive) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let d = params.scheme.levels();
        if len < d {
            return fail(
                RydsimStatus::BufferTooSmall,
                format!("populations needs {d} slots, got {len}"),
            );
        }
        let mut cache = SolveCache::new(false);
        match cache.single_populations(&params, delta_eff) {
            Ok(pops) => {
                std::ptr::copy_nonoverlapping(pops.as_ptr(), populations, d);
                RydsimStatus::Ok
            }
            Err(e) => fail(RydsimStatus::RunFailed, e.to_string()),
        }
    })
}

/// Joint steady-state populations of two coupled atoms at effective
/// detunings `delta1`, `delta2` with top-level pair coupling `coupling`
/// (all MHz). Fills `populations[0..levels^2]` with the first atom as the
/// most significant index; `len` must be at least `levels^2`.
#[no_mangle]
pub unsafe extern "C" fn rydsim_steady_pair(
    drive: *const RydsimDrive,
    delta1: f64,
    delta2: f64,
    coupling: f64,
    populations: *mut f64,
    len: usize,
) -> RydsimStatus {
    guarded(|| {
        if drive.is_null() || populations.is_null() {
            return fail(RydsimStatus::NullArgument, "drive or populations is NULL");
        }
        let params = match drive_params(&*drive) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let d = params.scheme.levels();
        if len < d * d {
            return fail(
                RydsimStatus::BufferTooSmall,
                format!("populations needs {} slots, got {len}", d * d),
            );
        }
        let mut cache = SolveCache::new(false);
        match cache.pair_populations(&params, delta1, delta2, coupling) {
            Ok(pops) => {
                std::ptr::copy_nonoverlapping(pops.as_ptr(), populations, d * d);
                RydsimStatus::Ok
            }
            Err(e) => fail(RydsimStatus::RunFailed, e.to_string()),
        }
    })
}
