//! C interface to the `modeswitch` simulator.
//!
//! Handles are opaque pointers created by `ms_*_new` style functions and
//! released with the matching `ms_*_free`. Every fallible function returns an
//! [`MsStatus`]; on failure a message is stored per thread and can be read
//! with [`ms_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use modeswitch::controller::{DrivingMode, RtiEvent, StepRecord, Trip};
use modeswitch::driver::DriverState;
use modeswitch::harness::experiment::generate_trip_road;
use modeswitch::harness::{write_trace, SimConfig, TripMetrics};
use modeswitch::{Error, CONFIG_SCHEMA_VERSION};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    InvalidState = 5,
    Numerical = 6,
    Stalled = 7,
    Io = 8,
    Finished = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsMode {
    Auton = 0,
    Manual = 1,
    Stopped = 2,
}

impl From<DrivingMode> for MsMode {
    fn from(m: DrivingMode) -> Self {
        match m {
            DrivingMode::Auton => MsMode::Auton,
            DrivingMode::Manual => MsMode::Manual,
            DrivingMode::Stopped => MsMode::Stopped,
        }
    }
}

/// Opaque simulation configuration.
pub struct MsConfig {
    inner: SimConfig,
}

/// Opaque trip in progress.
pub struct MsTrip {
    trip: Trip,
    seed: u64,
    trace: Vec<StepRecord>,
}

/// One interval as seen from C.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MsStep {
    pub interval: u64,
    pub position: u64,
    pub end_position: u64,
    /// An `MsMode` value.
    pub mode: u8,
    pub speed: u8,
    pub driver_distracted: bool,
    pub p_distracted: f64,
    pub utility: f64,
    pub skids: u32,
    pub crashes: u32,
    pub rti_issued: bool,
    pub rti_completed: bool,
    pub rti_aborted: bool,
    pub warnings: u32,
}

/// Headline metrics of a trip.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MsTripMetrics {
    pub utility: f64,
    pub intervals: u64,
    pub auton_fraction: f64,
    pub manual_fraction: f64,
    pub stopped_fraction: f64,
    pub rti_issued: u32,
    pub rti_completed: u32,
    pub rti_aborted: u32,
    pub aborted_proportion: f64,
    pub skids: u32,
    pub crashes: u32,
    pub crashes_auton: u32,
    pub crashes_manual_distracted: u32,
    pub rock_stops: u32,
}

impl From<&TripMetrics> for MsTripMetrics {
    fn from(m: &TripMetrics) -> Self {
        Self {
            utility: m.utility,
            intervals: m.intervals,
            auton_fraction: m.auton_fraction,
            manual_fraction: m.manual_fraction,
            stopped_fraction: m.stopped_fraction,
            rti_issued: m.rti_issued,
            rti_completed: m.rti_completed,
            rti_aborted: m.rti_aborted,
            aborted_proportion: m.aborted_proportion,
            skids: m.skids,
            crashes: m.crashes,
            crashes_auton: m.crashes_auton,
            crashes_manual_distracted: m.crashes_manual_distracted,
            rock_stops: m.rock_stops,
        }
    }
}

impl From<&StepRecord> for MsStep {
    fn from(r: &StepRecord) -> Self {
        Self {
            interval: r.interval as u64,
            position: r.position as u64,
            end_position: r.end_position as u64,
            mode: MsMode::from(r.mode) as u8,
            speed: r.speed,
            driver_distracted: r.driver_state == DriverState::Distracted,
            p_distracted: r.p_distracted,
            utility: r.utility,
            skids: r.crossed.iter().filter(|c| c.skidded).count() as u32,
            crashes: r.crossed.iter().filter(|c| c.collided).count() as u32,
            rti_issued: r.rti.iter().any(|e| matches!(e, RtiEvent::Issued { .. })),
            rti_completed: r.rti.contains(&RtiEvent::Completed),
            rti_aborted: r.rti.iter().any(|e| e.is_aborted()),
            warnings: r.warnings.len() as u32,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MsStatus {
    match e {
        Error::InvalidArgument(_) => MsStatus::InvalidArgument,
        Error::InvalidState(_) => MsStatus::InvalidState,
        Error::NumericalDegeneracy(_) => MsStatus::Numerical,
        Error::Config { .. } => MsStatus::Config,
        Error::Stalled { .. } => MsStatus::Stalled,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => MsStatus::Io,
    }
}

struct Failure(MsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status and a stored message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            MsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Version of the configuration schema this library reads.
#[no_mangle]
pub extern "C" fn ms_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library on the same
/// thread.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a built-in profile (`paper-baseline`, `safer`) or a TOML file path.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_config_load(source: *const c_char, out: *mut *mut MsConfig) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let source = str_arg(source, "source")?;
        *out = boxed(MsConfig { inner: SimConfig::load(source)? });
        Ok(())
    })
}

/// Parses a configuration from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_config_from_toml(toml: *const c_char, out: *mut *mut MsConfig) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(toml, "toml")?;
        *out = boxed(MsConfig { inner: SimConfig::from_toml_str(text)? });
        Ok(())
    })
}

/// Serializes the configuration to TOML; release with [`ms_string_free`].
///
/// # Safety
/// `config` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_config_to_toml(config: *const MsConfig, out: *mut *mut c_char) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let text = config.inner.to_toml_string()?;
        *out = CString::new(text).map_err(|e| Failure(MsStatus::InvalidArgument, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ms_config_free(config: *mut MsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Generates a road from the configuration and starts a trip on it.
///
/// # Safety
/// `config` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_trip_new(config: *const MsConfig, seed: u64, out: *mut *mut MsTrip) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config = &config.as_ref().ok_or_else(|| null("config"))?.inner;
        config.validate()?;
        let road = generate_trip_road(config, seed)?;
        let trip = Trip::new(config.trip.clone(), road, seed)?;
        *out = boxed(MsTrip { trip, seed, trace: Vec::new() });
        Ok(())
    })
}

/// Advances one interval. Returns [`MsStatus::Finished`] without touching
/// `out` once the last cell is reached.
///
/// # Safety
/// `trip` must come from this library; `out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ms_trip_step(trip: *mut MsTrip, out: *mut MsStep) -> MsStatus {
    let mut finished = false;
    let status = guard(|| {
        let t = trip.as_mut().ok_or_else(|| null("trip"))?;
        match t.trip.step()? {
            Some(record) => {
                if let Some(out) = out.as_mut() {
                    *out = MsStep::from(&record);
                }
                t.trace.push(record);
            }
            None => finished = true,
        }
        Ok(())
    });
    if status == MsStatus::Ok && finished {
        MsStatus::Finished
    } else {
        status
    }
}

/// Runs the remaining intervals.
///
/// # Safety
/// `trip` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ms_trip_run(trip: *mut MsTrip) -> MsStatus {
    guard(|| {
        let t = trip.as_mut().ok_or_else(|| null("trip"))?;
        let rest = t.trip.run()?;
        t.trace.extend(rest);
        Ok(())
    })
}

/// # Safety
/// `trip` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_trip_is_finished(trip: *const MsTrip, out: *mut bool) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = trip.as_ref().ok_or_else(|| null("trip"))?.trip.is_finished();
        Ok(())
    })
}

/// Metrics of the intervals run so far.
///
/// # Safety
/// `trip` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_trip_metrics(trip: *const MsTrip, out: *mut MsTripMetrics) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = trip.as_ref().ok_or_else(|| null("trip"))?;
        *out = MsTripMetrics::from(&TripMetrics::from_tally(0, t.seed, t.trip.tally()));
        Ok(())
    })
}

/// The trace so far as JSON lines; release with [`ms_string_free`].
///
/// # Safety
/// `trip` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_trip_trace_json(trip: *const MsTrip, out: *mut *mut c_char) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = trip.as_ref().ok_or_else(|| null("trip"))?;
        let mut buf = Vec::new();
        write_trace(&t.trace, &mut buf)?;
        *out = CString::new(buf).map_err(|e| Failure(MsStatus::InvalidArgument, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `trip` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ms_trip_free(trip: *mut MsTrip) {
    if !trip.is_null() {
        drop(Box::from_raw(trip));
    }
}

/// Runs a whole trip and reports its metrics.
///
/// # Safety
/// `config` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_run_trip(config: *const MsConfig, seed: u64, out: *mut MsTripMetrics) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config = &config.as_ref().ok_or_else(|| null("config"))?.inner;
        let run = modeswitch::harness::run_trip(config, seed)?;
        *out = MsTripMetrics::from(&run.metrics);
        Ok(())
    })
}

/// # Safety
/// `s` must be a string returned by this library, or NULL.
#[no_mangle]
pub unsafe extern "C" fn ms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
