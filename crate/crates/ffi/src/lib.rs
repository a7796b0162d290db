//! C ABI over `ris-core`.
//!
//! Every fallible call returns a [`RisStatus`]; on failure a message is
//! available from [`ris_last_error_message`] on the same thread. Handles are
//! opaque and owned by the caller once created; release them with the
//! matching `*_free` function. Element states cross the boundary as `u8`
//! codes from [`RisElementState`], modes as `u32` codes from [`RisMode`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ris_core::beamform::{phase_profile, select_active, select_passive, PassiveStateSet};
use ris_core::channel::{received_power, ElementState, Mode, RisConfiguration};
use ris_core::document::SceneDocument;
use ris_core::geometry::{Direction, Scene};
use ris_core::sounder::{scan_pattern, FieldPattern, ScanOptions, ScanSetup};
use ris_core::RisError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DegenerateGeometry = 3,
    Domain = 4,
    Capacity = 5,
    Calibration = 6,
    Format = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisMode {
    Passive = 0,
    Active = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisElementState {
    PassiveA = 0,
    PassiveB = 1,
    ActiveOn = 2,
    ActiveOff = 3,
}

/// Array, RIS pose, TX/RX placement, reflection model and link budget.
pub struct RisScenario {
    setup: ScanSetup,
}

/// Field pattern produced by [`ris_scenario_scan`].
pub struct RisPattern {
    pattern: FieldPattern,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &RisError) -> RisStatus {
    match e {
        RisError::InvalidParameter(_) => RisStatus::InvalidParameter,
        RisError::DegenerateGeometry(_) => RisStatus::DegenerateGeometry,
        RisError::Domain(_) => RisStatus::Domain,
        RisError::Capacity { .. } => RisStatus::Capacity,
        RisError::Calibration(_) => RisStatus::Calibration,
        RisError::Format(_) => RisStatus::Format,
        RisError::Io { .. } => RisStatus::Io,
    }
}

enum Fail {
    Core(RisError),
    Status(RisStatus, &'static str),
}

impl From<RisError> for Fail {
    fn from(e: RisError) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RisStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RisStatus::Ok
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg.to_string());
            s
        }
        Err(_) => {
            set_error("internal panic".to_string());
            RisStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Status(RisStatus::NullPointer, "null handle"))
}

unsafe fn handle_mut<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Status(RisStatus::NullPointer, "null handle"))
}

fn null_check<T>(p: *const T) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail::Status(RisStatus::NullPointer, "null pointer argument"))
    } else {
        Ok(())
    }
}

fn state_code(s: ElementState) -> u8 {
    match s {
        ElementState::PassiveA => RisElementState::PassiveA as u8,
        ElementState::PassiveB => RisElementState::PassiveB as u8,
        ElementState::ActiveOn => RisElementState::ActiveOn as u8,
        ElementState::ActiveOff => RisElementState::ActiveOff as u8,
    }
}

fn state_from_code(c: u8) -> Result<ElementState, Fail> {
    Ok(match c {
        0 => ElementState::PassiveA,
        1 => ElementState::PassiveB,
        2 => ElementState::ActiveOn,
        3 => ElementState::ActiveOff,
        _ => return Err(Fail::Status(RisStatus::InvalidParameter, "unknown element state code")),
    })
}

unsafe fn read_configuration(states: *const u8, len: usize, expected: usize) -> Result<RisConfiguration, Fail> {
    null_check(states)?;
    if len != expected {
        return Err(Fail::Status(RisStatus::InvalidParameter, "state count differs from element count"));
    }
    let codes = std::slice::from_raw_parts(states, len);
    let parsed: Vec<ElementState> = codes.iter().map(|&c| state_from_code(c)).collect::<Result<_, _>>()?;
    let mode = parsed.first().map_or(Mode::Active, |s| s.mode());
    Ok(RisConfiguration::new(mode, parsed)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ris_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn ris_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Reference 37-element scenario with RX at the (15°, 30°) target.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_default_new(out: *mut *mut RisScenario) -> RisStatus {
    guard(|| {
        null_check(out)?;
        let s = Box::new(RisScenario {
            setup: ScanSetup::standard(),
        });
        *out = Box::into_raw(s);
        Ok(())
    })
}

/// Scenario from a NUL-terminated JSON scene document.
///
/// # Safety
/// `json` must be a valid C string and `out` valid for one handle write.
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_from_json(json: *const c_char, out: *mut *mut RisScenario) -> RisStatus {
    guard(|| {
        null_check(json)?;
        null_check(out)?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Fail::Status(RisStatus::Format, "scene document is not UTF-8"))?;
        let doc = SceneDocument::from_json(text)?;
        let mut setup = ScanSetup::standard();
        setup.rx_range = doc.scene.rx_local().norm();
        setup.array = doc.array;
        setup.scene = doc.scene;
        setup.model = doc.reflection_model;
        setup.budget = doc.link_budget;
        *out = Box::into_raw(Box::new(RisScenario { setup }));
        Ok(())
    })
}

/// Releases a scenario. NULL is ignored.
///
/// # Safety
/// `scenario` must come from `ris_scenario_default_new` or `ris_scenario_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_free(scenario: *mut RisScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_element_count(scenario: *const RisScenario, out: *mut usize) -> RisStatus {
    guard(|| {
        let s = handle(scenario)?;
        null_check(out)?;
        *out = s.setup.array.len();
        Ok(())
    })
}

/// Moves the RX to `range` meters along (azimuth, elevation) in degrees.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_set_rx_direction(
    scenario: *mut RisScenario,
    azimuth_deg: f64,
    elevation_deg: f64,
    range: f64,
) -> RisStatus {
    guard(|| {
        let s = handle_mut(scenario)?;
        let scene = s.setup.scene.with_rx_direction(Direction::new(azimuth_deg, elevation_deg)?, range)?;
        s.setup.scene = scene;
        s.setup.rx_range = range;
        Ok(())
    })
}

/// Designs a configuration steering towards (azimuth, elevation) at the
/// scenario's RX range and writes `element_count` state codes to `out_states`.
///
/// # Safety
/// `scenario` must be a live handle; `out_states` must hold `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_design(
    scenario: *const RisScenario,
    mode: u32,
    azimuth_deg: f64,
    elevation_deg: f64,
    out_states: *mut u8,
    capacity: usize,
) -> RisStatus {
    guard(|| {
        let s = handle(scenario)?;
        null_check(out_states)?;
        let k = s.setup.array.len();
        if capacity < k {
            return Err(Fail::Status(RisStatus::BufferTooSmall, "state buffer smaller than element count"));
        }
        let target: Scene = s
            .setup
            .scene
            .with_rx_direction(Direction::new(azimuth_deg, elevation_deg)?, s.setup.rx_range)?;
        let profile = phase_profile(&s.setup.array, &target)?;
        let config = match mode {
            m if m == RisMode::Passive as u32 => {
                select_passive(&profile, &PassiveStateSet::from_model(&s.setup.model)?)
            }
            m if m == RisMode::Active as u32 => select_active(&profile),
            _ => return Err(Fail::Status(RisStatus::InvalidParameter, "unknown mode code")),
        };
        let out = std::slice::from_raw_parts_mut(out_states, k);
        for (o, st) in out.iter_mut().zip(config.states()) {
            *o = state_code(*st);
        }
        Ok(())
    })
}

/// Received power in watts at the scenario's current RX position.
///
/// # Safety
/// `scenario` must be a live handle, `states` must hold `len` bytes, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_received_power(
    scenario: *const RisScenario,
    states: *const u8,
    len: usize,
    out: *mut f64,
) -> RisStatus {
    guard(|| {
        let s = handle(scenario)?;
        null_check(out)?;
        let config = read_configuration(states, len, s.setup.array.len())?;
        *out = received_power(&s.setup.array, &s.setup.scene, &config, &s.setup.model, &s.setup.budget)?;
        Ok(())
    })
}

/// Carrier-frequency field pattern over a `±extent` grid with `spacing`
/// degrees, leaving out `exclude_cone_deg` around the TX (negative keeps all).
///
/// # Safety
/// `scenario` must be a live handle, `states` must hold `len` bytes, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ris_scenario_scan(
    scenario: *const RisScenario,
    states: *const u8,
    len: usize,
    spacing_deg: f64,
    extent_deg: f64,
    exclude_cone_deg: f64,
    out: *mut *mut RisPattern,
) -> RisStatus {
    guard(|| {
        let s = handle(scenario)?;
        null_check(out)?;
        let config = read_configuration(states, len, s.setup.array.len())?;
        let options = ScanOptions {
            grid_spacing: spacing_deg,
            extent: extent_deg,
            exclude_tx_cone: (exclude_cone_deg >= 0.0).then_some(exclude_cone_deg),
            ..ScanOptions::default()
        };
        let pattern = scan_pattern(&s.setup, &config, &options)?;
        *out = Box::into_raw(Box::new(RisPattern { pattern }));
        Ok(())
    })
}

/// # Safety
/// `pattern` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ris_pattern_len(pattern: *const RisPattern, out: *mut usize) -> RisStatus {
    guard(|| {
        let p = handle(pattern)?;
        null_check(out)?;
        *out = p.pattern.len();
        Ok(())
    })
}

/// Point `index` in grid order.
///
/// # Safety
/// `pattern` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ris_pattern_get(
    pattern: *const RisPattern,
    index: usize,
    azimuth_deg: *mut f64,
    elevation_deg: *mut f64,
    power_w: *mut f64,
) -> RisStatus {
    guard(|| {
        let p = handle(pattern)?;
        null_check(azimuth_deg)?;
        null_check(elevation_deg)?;
        null_check(power_w)?;
        let point = p
            .pattern
            .points
            .get(index)
            .ok_or(Fail::Status(RisStatus::InvalidParameter, "pattern index out of range"))?;
        *azimuth_deg = point.direction.azimuth;
        *elevation_deg = point.direction.elevation;
        *power_w = point.power;
        Ok(())
    })
}

/// Releases a pattern. NULL is ignored.
///
/// # Safety
/// `pattern` must come from [`ris_scenario_scan`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ris_pattern_free(pattern: *mut RisPattern) {
    if !pattern.is_null() {
        drop(Box::from_raw(pattern));
    }
}
