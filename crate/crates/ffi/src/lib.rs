//! C interface to the planner.
//!
//! Objects are opaque handles created by `irs_*_new`/`irs_*_from_*` functions
//! and released with the matching `irs_*_free`. Every fallible call returns
//! an [`IrsStatus`]; on failure the message is available from
//! [`irs_last_error`] on the same thread. Panics are caught at the boundary
//! and reported as [`IrsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use irsplan::planner::InitLabel;
use irsplan::radiomap::build_map;
use irsplan::scenario::motion_energy;
use irsplan::sco::{run, PlanOutcome, ScoConfig};
use irsplan::snrmodel::{fit, SnrModel};
use irsplan::{Error, Position, Scenario, ScenarioConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IrsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bad configuration, unparsable input or an unsupported file version.
    Config = 3,
    /// Solver or fitting failure.
    Numerical = 4,
    /// No trajectory satisfies the constraints.
    Infeasible = 5,
    Panic = 6,
}

/// Initial solution that seeded a plan.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IrsInitLabel {
    MinEnergy = 0,
    MaxRate = 1,
}

/// Opaque scenario handle.
pub struct IrsScenario(Scenario);

/// Opaque fitted-model handle.
pub struct IrsModel(SnrModel);

/// Opaque planning result.
pub struct IrsPlan {
    trajectory: Vec<Position>,
    energy: f64,
    rate: f64,
    iterations: usize,
    label: InitLabel,
}

/// SCO settings passed by value.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct IrsScoOptions {
    pub epsilon: f64,
    pub n_it_max: u32,
    pub trust_radius: f64,
    pub grid_spacing: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> IrsStatus {
    match e {
        Error::Config { .. }
        | Error::Parse { .. }
        | Error::UnsupportedVersion { .. }
        | Error::InvalidScenario(_)
        | Error::InvalidObstacle(_)
        | Error::Io { .. } => IrsStatus::Config,
        Error::InvalidTrajectory(_) | Error::Domain(_) => IrsStatus::InvalidArgument,
        Error::GraphInfeasible | Error::InfeasibleEndpoint(_) => IrsStatus::Infeasible,
        _ => IrsStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (IrsStatus, String)>) -> IrsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            IrsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside irsplan");
            IrsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (IrsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (IrsStatus, String) {
    (IrsStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (IrsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (IrsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn irs_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// The bundled desk-scale scenario.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_reference(out: *mut *mut IrsScenario) -> IrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = ScenarioConfig::reference().build().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IrsScenario(s)));
        Ok(())
    })
}

/// Parses a scenario TOML document.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_from_toml(toml: *const c_char, out: *mut *mut IrsScenario) -> IrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = text(toml, "toml")?;
        let s = ScenarioConfig::from_toml_str(t)
            .and_then(|c| c.build())
            .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IrsScenario(s)));
        Ok(())
    })
}

/// Overrides the IRS size and rate target (bits/s) of a scenario in place.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_set_link(
    scenario: *mut IrsScenario,
    irs_elements: u32,
    r_min_bits_s: f64,
) -> IrsStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        let updated = s.0.with_irs_elements(irs_elements as usize).with_r_min(r_min_bits_s);
        updated.validate().map_err(lib_err)?;
        s.0 = updated;
        Ok(())
    })
}

/// Number of slots `K`; trajectories have `K + 1` waypoints.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_slots(scenario: *const IrsScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.k_slots)
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_free(scenario: *mut IrsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Motion energy of a trajectory given as `n` interleaved `(x, y)` pairs.
///
/// # Safety
/// `xy` must be valid for `2 n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn irs_motion_energy(
    scenario: *const IrsScenario,
    xy: *const f64,
    n: usize,
    out: *mut f64,
) -> IrsStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if xy.is_null() {
            return Err(null("xy"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let pts = std::slice::from_raw_parts(xy, 2 * n);
        let traj: Vec<Position> = pts.chunks_exact(2).map(|c| Position::new(c[0], c[1])).collect();
        *out = motion_energy(&traj, &s.0).map_err(lib_err)?;
        Ok(())
    })
}

/// Builds an `nx × ny` radio map with `draws` channel draws per cell and fits
/// the per-class SNR model to it.
///
/// # Safety
/// `scenario` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn irs_model_fit(
    scenario: *const IrsScenario,
    nx: u32,
    ny: u32,
    draws: u32,
    seed: u64,
    out: *mut *mut IrsModel,
) -> IrsStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let map = build_map(&s.0, nx as usize, ny as usize, draws, seed).map_err(lib_err)?;
        let model = fit(&map, &s.0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IrsModel(model)));
        Ok(())
    })
}

/// Parses a model file's TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn irs_model_from_toml(toml: *const c_char, out: *mut *mut IrsModel) -> IrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = SnrModel::from_toml_str(text(toml, "toml")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IrsModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_model_free(model: *mut IrsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Default SCO settings.
#[no_mangle]
pub extern "C" fn irs_sco_options_default() -> IrsScoOptions {
    let d = ScoConfig::default();
    IrsScoOptions {
        epsilon: d.epsilon,
        n_it_max: d.n_it_max as u32,
        trust_radius: d.trust_radius,
        grid_spacing: d.grid_spacing,
    }
}

/// Selects an initial solution and optimizes it. Returns
/// [`IrsStatus::Infeasible`] (and leaves `*out` null) when no initial
/// candidate satisfies the constraints.
///
/// # Safety
/// `scenario` and `model` must be live handles; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn irs_plan(
    scenario: *const IrsScenario,
    model: *const IrsModel,
    options: IrsScoOptions,
    out: *mut *mut IrsPlan,
) -> IrsStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = ScoConfig {
            epsilon: options.epsilon,
            n_it_max: options.n_it_max as usize,
            trust_radius: options.trust_radius,
            grid_spacing: options.grid_spacing,
            ..ScoConfig::default()
        };
        match run(&s.0, &m.0, &cfg).map_err(lib_err)? {
            PlanOutcome::Infeasible { .. } => Err((
                IrsStatus::Infeasible,
                "neither initial solution satisfies the constraints".into(),
            )),
            PlanOutcome::Planned { label, run, .. } => {
                *out = Box::into_raw(Box::new(IrsPlan {
                    energy: run.energy,
                    rate: run.audit.rate,
                    iterations: run.trace.sco_iterations(),
                    trajectory: run.trajectory,
                    label,
                }));
                Ok(())
            }
        }
    })
}

/// Number of waypoints of a plan.
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_plan_len(plan: *const IrsPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.trajectory.len())
}

/// Copies up to `cap` waypoints as interleaved `(x, y)` pairs into `xy`
/// (which must hold `2 cap` doubles). Returns the number copied.
///
/// # Safety
/// `plan` must be a live handle and `xy` valid for `2 cap` writes.
#[no_mangle]
pub unsafe extern "C" fn irs_plan_waypoints(plan: *const IrsPlan, xy: *mut f64, cap: usize) -> usize {
    let (Some(p), false) = (plan.as_ref(), xy.is_null()) else {
        return 0;
    };
    let n = p.trajectory.len().min(cap);
    let out = std::slice::from_raw_parts_mut(xy, 2 * n);
    for (i, q) in p.trajectory.iter().take(n).enumerate() {
        out[2 * i] = q.x;
        out[2 * i + 1] = q.y;
    }
    n
}

/// Final motion energy in joules (NaN for a null handle).
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_plan_energy(plan: *const IrsPlan) -> f64 {
    plan.as_ref().map_or(f64::NAN, |p| p.energy)
}

/// Average rate of the final trajectory under the fitted model, bits/s.
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_plan_rate(plan: *const IrsPlan) -> f64 {
    plan.as_ref().map_or(f64::NAN, |p| p.rate)
}

/// SCO iterations performed.
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_plan_iterations(plan: *const IrsPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.iterations)
}

/// # Safety
/// `plan` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_plan_initial_label(plan: *const IrsPlan) -> IrsInitLabel {
    match plan.as_ref().map(|p| p.label) {
        Some(InitLabel::MaxRate) => IrsInitLabel::MaxRate,
        _ => IrsInitLabel::MinEnergy,
    }
}

/// # Safety
/// `plan` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_plan_free(plan: *mut IrsPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}
