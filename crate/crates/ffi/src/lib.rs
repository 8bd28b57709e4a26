//! C ABI over `streaklab`.
//!
//! Objects are opaque handles created by `sl_*_new`/`sl_*` constructors and
//! released with the matching `sl_*_free`. Every fallible call returns an
//! [`SlStatus`]; on failure `sl_last_error_message` describes the error for
//! the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use streaklab::analysis::{estimate_fringes, which_path_with_threshold, FringeEstimate, HigherEnergy};
use streaklab::budget::compute_budget;
use streaklab::config::ExperimentConfig;
use streaklab::detector::events_io::{read_events, write_events};
use streaklab::detector::{simulate_shot, Interferogram};
use streaklab::physics::{BeamGeometry, Orientation};
use streaklab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoFringes = 3,
    InsufficientEvents = 4,
    NonConvergence = 5,
    ResourceLimit = 6,
    Parse = 7,
    Config = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlOrientation {
    OxebPositive = 0,
    ChebPositive = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlHigherEnergy {
    Undetermined = 0,
    Cheb = 1,
    Oxeb = 2,
}

/// Experiment configuration.
pub struct SlConfig(ExperimentConfig);

/// One exposure: events plus binned image.
pub struct SlInterferogram(Interferogram);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SlFringeEstimate {
    pub spatial_freq_cyc_per_mm: f64,
    pub spatial_freq_stderr: f64,
    pub slope_mm_per_ns: f64,
    pub slope_stderr: f64,
    pub slope_uncertainty: f64,
    pub beat_freq_mhz: f64,
    pub beat_freq_stderr_mhz: f64,
    pub delta_nu_mhz: f64,
    pub visibility: f64,
    pub visibility_stderr: f64,
    pub phase0_rad: f64,
    pub residual_rms: f64,
    pub n_events: u64,
    pub overlap_ns: f64,
    pub fit_start_ns: f64,
    pub fit_end_ns: f64,
    pub fourier_limit_mhz: f64,
    pub t_spread_ns: f64,
    pub y_spread_mm: f64,
    pub peak_ratio: f64,
    pub iterations: u32,
    /// 0 = oxeb-positive, 1 = cheb-positive.
    pub orientation: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlVerdict {
    pub higher_energy: SlHigherEnergy,
    pub confidence: f64,
    pub threshold: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SlBudget {
    pub photons_per_ns_at_detector: f64,
    pub detected_per_ns: f64,
    pub detected_per_ns_quoted: f64,
    pub sql_phase_rad: f64,
    pub sql_phase_rad_quoted: f64,
    pub fringe_pos_uncertainty_um: f64,
    pub fringe_pos_uncertainty_um_quoted: f64,
    pub sql_vs_measurement: f64,
    pub sql_vs_measurement_quoted: f64,
    pub fourier_dnu_mhz: f64,
    pub st_linewidth_hz: f64,
    pub distinguishability_ns: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SlStatus {
    match e {
        Error::InvalidParameter { .. } | Error::DegenerateGeometry => SlStatus::InvalidArgument,
        Error::ResourceLimit { .. } => SlStatus::ResourceLimit,
        Error::NoFringes { .. } => SlStatus::NoFringes,
        Error::InsufficientEvents { .. } => SlStatus::InsufficientEvents,
        Error::NonConvergence { .. } => SlStatus::NonConvergence,
        Error::Parse { .. } => SlStatus::Parse,
        Error::Config { .. } => SlStatus::Config,
        Error::MissingTruth(_) | Error::Io { .. } => SlStatus::Io,
    }
}

fn fail(status: SlStatus, msg: impl Into<String>) -> SlStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), SlStatus>) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SlStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lift<T>(r: streaklab::Result<T>) -> Result<T, SlStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, SlStatus> {
    if p.is_null() {
        return Err(fail(SlStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SlStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, SlStatus> {
    p.as_mut().ok_or_else(|| fail(SlStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn in_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, SlStatus> {
    p.as_ref().ok_or_else(|| fail(SlStatus::NullPointer, format!("`{name}` is null")))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_config_new(out: *mut *mut SlConfig) -> SlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(SlConfig(ExperimentConfig::default())));
        Ok(())
    })
}

/// Parses a TOML configuration. `strict != 0` rejects unknown keys.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_config_from_toml(toml: *const c_char, strict: i32, out: *mut *mut SlConfig) -> SlStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let out = out_arg(out, "out")?;
        let loaded = lift(ExperimentConfig::parse(text, strict != 0))?;
        *out = Box::into_raw(Box::new(SlConfig(loaded.config)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sl_config_free(cfg: *mut SlConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sl_config_set_seed(cfg: *mut SlConfig, seed: u64) -> SlStatus {
    guard(|| {
        out_arg(cfg, "cfg")?.0.seed = seed;
        Ok(())
    })
}

/// Fixes `ν₂ − ν₁` at `delta_nu_mhz` and disables shot-to-shot drift.
///
/// # Safety
/// `cfg` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sl_config_set_detuning(cfg: *mut SlConfig, delta_nu_mhz: f64) -> SlStatus {
    guard(|| {
        if !delta_nu_mhz.is_finite() {
            return Err(fail(SlStatus::InvalidArgument, "`delta_nu_mhz` must be finite"));
        }
        let c = &mut out_arg(cfg, "cfg")?.0;
        c.detuning.nominal_offset_mhz = delta_nu_mhz;
        c.cheb.noise.drift_rate_hz_per_s = 0.0;
        c.oxeb.noise.drift_rate_hz_per_s = 0.0;
        Ok(())
    })
}

/// Simulates shot `shot_index` of the configured run.
///
/// # Safety
/// `cfg` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_simulate_shot(
    cfg: *const SlConfig,
    shot_index: u64,
    out: *mut *mut SlInterferogram,
) -> SlStatus {
    guard(|| {
        let c = &in_arg(cfg, "cfg")?.0;
        let out = out_arg(out, "out")?;
        let sources = c.shot_sources(shot_index);
        let mut ig = lift(simulate_shot(&sources, &c.geometry, &c.detector, c.shot_seed(shot_index)))?;
        ig.shot_index = shot_index;
        *out = Box::into_raw(Box::new(SlInterferogram(ig)));
        Ok(())
    })
}

/// Reads an event file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_interferogram_read(path: *const c_char, out: *mut *mut SlInterferogram) -> SlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let file = File::open(path).map_err(|e| fail(SlStatus::Io, format!("{path}: {e}")))?;
        let parsed = lift(read_events(BufReader::new(file)))?;
        *out = Box::into_raw(Box::new(SlInterferogram(parsed.into_interferogram())));
        Ok(())
    })
}

/// Writes the events in the text event format.
///
/// # Safety
/// `ig` must be a valid handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sl_interferogram_write(ig: *const SlInterferogram, path: *const c_char) -> SlStatus {
    guard(|| {
        let ig = &in_arg(ig, "ig")?.0;
        let path = str_arg(path, "path")?;
        let io = |e: std::io::Error| fail(SlStatus::Io, format!("{path}: {e}"));
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        write_events(&mut w, ig).and_then(|_| w.flush()).map_err(io)
    })
}

/// # Safety
/// `ig` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sl_interferogram_free(ig: *mut SlInterferogram) {
    if !ig.is_null() {
        drop(Box::from_raw(ig));
    }
}

/// Number of events, or 0 for a null handle.
///
/// # Safety
/// `ig` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sl_interferogram_event_count(ig: *const SlInterferogram) -> usize {
    ig.as_ref().map_or(0, |ig| ig.0.events.len())
}

/// Copies event coordinates into `t_ns` and `y_mm`, each of length `capacity`.
///
/// # Safety
/// The buffers must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sl_interferogram_events(
    ig: *const SlInterferogram,
    t_ns: *mut f64,
    y_mm: *mut f64,
    capacity: usize,
) -> SlStatus {
    guard(|| {
        let ig = &in_arg(ig, "ig")?.0;
        if t_ns.is_null() || y_mm.is_null() {
            return Err(fail(SlStatus::NullPointer, "event buffers are null"));
        }
        let n = ig.events.len();
        if capacity < n {
            return Err(fail(SlStatus::BufferTooSmall, format!("need {n} slots, got {capacity}")));
        }
        let t = std::slice::from_raw_parts_mut(t_ns, n);
        let y = std::slice::from_raw_parts_mut(y_mm, n);
        for (i, e) in ig.events.iter().enumerate() {
            t[i] = e.t_ns;
            y[i] = e.y_mm;
        }
        Ok(())
    })
}

/// Image dimensions: time bins and y bins.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_interferogram_image_size(
    ig: *const SlInterferogram,
    t_bins: *mut usize,
    y_bins: *mut usize,
) -> SlStatus {
    guard(|| {
        let g = in_arg(ig, "ig")?.0.grid();
        *out_arg(t_bins, "t_bins")? = g.t_bins;
        *out_arg(y_bins, "y_bins")? = g.y_bins;
        Ok(())
    })
}

/// Copies the count image, row-major with y rows of `t_bins` counts each.
///
/// # Safety
/// `counts` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn sl_interferogram_image(
    ig: *const SlInterferogram,
    counts: *mut u32,
    capacity: usize,
) -> SlStatus {
    guard(|| {
        let img = &in_arg(ig, "ig")?.0.image;
        if counts.is_null() {
            return Err(fail(SlStatus::NullPointer, "`counts` is null"));
        }
        let n = img.counts.len();
        if capacity < n {
            return Err(fail(SlStatus::BufferTooSmall, format!("need {n} slots, got {capacity}")));
        }
        std::slice::from_raw_parts_mut(counts, n).copy_from_slice(&img.counts);
        Ok(())
    })
}

/// Ground-truth `ν₂ − ν₁` of a simulated shot. Fails for shots read from disk.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_interferogram_true_delta_nu(ig: *const SlInterferogram, out: *mut f64) -> SlStatus {
    guard(|| {
        let ig = &in_arg(ig, "ig")?.0;
        let out = out_arg(out, "out")?;
        let truth = ig.truth.ok_or_else(|| fail(SlStatus::InvalidArgument, "interferogram carries no ground truth"))?;
        *out = truth.delta_nu_mhz;
        Ok(())
    })
}

fn to_c(e: &FringeEstimate) -> SlFringeEstimate {
    SlFringeEstimate {
        spatial_freq_cyc_per_mm: e.spatial_freq_cyc_per_mm,
        spatial_freq_stderr: e.spatial_freq_stderr,
        slope_mm_per_ns: e.slope_mm_per_ns,
        slope_stderr: e.slope_stderr,
        slope_uncertainty: e.slope_uncertainty,
        beat_freq_mhz: e.beat_freq_mhz,
        beat_freq_stderr_mhz: e.beat_freq_stderr_mhz,
        delta_nu_mhz: e.delta_nu_mhz,
        visibility: e.visibility,
        visibility_stderr: e.visibility_stderr,
        phase0_rad: e.phase0_rad,
        residual_rms: e.residual_rms,
        n_events: e.n_events as u64,
        overlap_ns: e.overlap_ns,
        fit_start_ns: e.fit_window_ns.0,
        fit_end_ns: e.fit_window_ns.1,
        fourier_limit_mhz: e.fourier_limit_mhz,
        t_spread_ns: e.t_spread_ns,
        y_spread_mm: e.y_spread_mm,
        peak_ratio: e.peak_ratio,
        iterations: e.iterations as u32,
        orientation: match e.orientation {
            Orientation::OxebPositive => SlOrientation::OxebPositive as u32,
            Orientation::ChebPositive => SlOrientation::ChebPositive as u32,
        },
    }
}

fn from_c(e: &SlFringeEstimate) -> Result<FringeEstimate, SlStatus> {
    let orientation = match e.orientation {
        0 => Orientation::OxebPositive,
        1 => Orientation::ChebPositive,
        o => return Err(fail(SlStatus::InvalidArgument, format!("unknown orientation {o}"))),
    };
    Ok(FringeEstimate {
        spatial_freq_cyc_per_mm: e.spatial_freq_cyc_per_mm,
        spatial_freq_stderr: e.spatial_freq_stderr,
        slope_mm_per_ns: e.slope_mm_per_ns,
        slope_stderr: e.slope_stderr,
        slope_uncertainty: e.slope_uncertainty,
        beat_freq_mhz: e.beat_freq_mhz,
        beat_freq_stderr_mhz: e.beat_freq_stderr_mhz,
        delta_nu_mhz: e.delta_nu_mhz,
        visibility: e.visibility,
        visibility_stderr: e.visibility_stderr,
        phase0_rad: e.phase0_rad,
        residual_rms: e.residual_rms,
        n_events: e.n_events as usize,
        overlap_ns: e.overlap_ns,
        fit_window_ns: (e.fit_start_ns, e.fit_end_ns),
        fourier_limit_mhz: e.fourier_limit_mhz,
        t_spread_ns: e.t_spread_ns,
        y_spread_mm: e.y_spread_mm,
        peak_ratio: e.peak_ratio,
        iterations: e.iterations as usize,
        orientation,
    })
}

/// Fits the fringes of one interferogram.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_estimate_fringes(ig: *const SlInterferogram, out: *mut SlFringeEstimate) -> SlStatus {
    guard(|| {
        let ig = &in_arg(ig, "ig")?.0;
        let out = out_arg(out, "out")?;
        *out = to_c(&lift(estimate_fringes(ig))?);
        Ok(())
    })
}

/// Names the higher-energy source. `threshold <= 0` uses the default of 5.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_which_path(est: *const SlFringeEstimate, threshold: f64, out: *mut SlVerdict) -> SlStatus {
    guard(|| {
        let est = from_c(in_arg(est, "est")?)?;
        let out = out_arg(out, "out")?;
        let threshold = if threshold > 0.0 { threshold } else { streaklab::analysis::CONFIDENCE_THRESHOLD };
        let geo = BeamGeometry::default().with_orientation(est.orientation);
        let v = which_path_with_threshold(&est, &geo, threshold);
        *out = SlVerdict {
            higher_energy: match v.higher_energy_source {
                HigherEnergy::Cheb => SlHigherEnergy::Cheb,
                HigherEnergy::Oxeb => SlHigherEnergy::Oxeb,
                HigherEnergy::Undetermined => SlHigherEnergy::Undetermined,
            },
            confidence: v.confidence,
            threshold: v.threshold,
        };
        Ok(())
    })
}

/// Photon and uncertainty budget for the configuration's budget section.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_compute_budget(cfg: *const SlConfig, out: *mut SlBudget) -> SlStatus {
    guard(|| {
        let c = &in_arg(cfg, "cfg")?.0;
        let out = out_arg(out, "out")?;
        let r = lift(compute_budget(&c.budget))?;
        *out = SlBudget {
            photons_per_ns_at_detector: r.photons_per_ns_at_detector,
            detected_per_ns: r.detected_per_ns,
            detected_per_ns_quoted: r.detected_per_ns_quoted,
            sql_phase_rad: r.sql_phase_rad,
            sql_phase_rad_quoted: r.sql_phase_rad_quoted,
            fringe_pos_uncertainty_um: r.fringe_pos_uncertainty_um,
            fringe_pos_uncertainty_um_quoted: r.fringe_pos_uncertainty_um_quoted,
            sql_vs_measurement: r.sql_vs_measurement,
            sql_vs_measurement_quoted: r.sql_vs_measurement_quoted,
            fourier_dnu_mhz: r.fourier_dnu_mhz,
            st_linewidth_hz: r.st_linewidth_hz,
            distinguishability_ns: r.distinguishability_ns,
        };
        Ok(())
    })
}
