//! C ABI for `fogcap`.
//!
//! Every fallible function returns a [`FogStatus`]; on failure a message is
//! available from [`fog_last_error`] on the same thread. Outputs are written
//! through caller-provided pointers only on success. Panics are caught at the
//! boundary and reported as `FOG_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fogcap::gd1::Gd1Config;
use fogcap::optimizer::{self, Algorithm1Options};
use fogcap::stoploss::{stop_loss, ScalarDistribution};
use fogcap::workload::{load_trace, WorkloadModel};
use fogcap::{FogError, OverflowMethod, QleConfig, Scenario, SimOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FogStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    /// G/D/1 evaluated where the shallow service is below the mean input.
    Validity = 4,
    /// Autocovariance yields a non-positive aggregate variance.
    Model = 5,
    Range = 6,
    Parse = 7,
    EmptyInput = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FogMethodKind {
    Gd1 = 0,
    Qle = 1,
    Sim = 2,
}

/// Estimator selection. Fields not used by `kind` are ignored.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FogMethod {
    pub kind: FogMethodKind,
    /// Largest aggregation window scanned by the G/D/1 estimator.
    pub n_max: usize,
    /// Autocovariance lags used by the G/D/1 estimator.
    pub max_lag: usize,
    /// Queue-estimate shift as a multiple of each cloudlet's standard deviation.
    pub kappa_coeff: f64,
    pub n_slots: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FogSimResult {
    pub alpha: f64,
    pub avg_loss: f64,
    pub loss_probability: f64,
    pub std_err: f64,
    pub conservation_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FogOptimizeResult {
    pub alpha_star: f64,
    pub objective: f64,
    pub iterations: usize,
    pub feasible: bool,
}

/// Opaque scenario under construction: budget, deadline and cloudlet models.
pub struct FogScenario {
    budget: f64,
    deadline: f64,
    models: Vec<WorkloadModel>,
}

impl FogScenario {
    fn build(&self) -> fogcap::Result<Scenario> {
        Scenario::new(self.budget, self.deadline, self.models.clone())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &FogError) -> FogStatus {
    match e {
        FogError::Parameter(_) => FogStatus::InvalidParameter,
        FogError::Domain(_) => FogStatus::Domain,
        FogError::Validity { .. } => FogStatus::Validity,
        FogError::Model { .. } => FogStatus::Model,
        FogError::Range { .. } => FogStatus::Range,
        FogError::Parse { .. } => FogStatus::Parse,
        FogError::EmptyInput(_) => FogStatus::EmptyInput,
        FogError::Io { .. } => FogStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(FogError),
}

impl From<FogError> for Fail {
    fn from(e: FogError) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FogStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FogStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            FogStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FogStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn to_method(m: &FogMethod) -> OverflowMethod {
    match m.kind {
        FogMethodKind::Gd1 => OverflowMethod::Gd1(Gd1Config {
            n_max: m.n_max,
            max_lag: m.max_lag,
        }),
        FogMethodKind::Qle => OverflowMethod::Qle(QleConfig {
            kappa_coeff: m.kappa_coeff,
            kappa_override: None,
        }),
        FogMethodKind::Sim => OverflowMethod::Sim(SimOptions::new(m.n_slots, m.seed)),
    }
}

/// Last error message on this thread, or NULL. Valid until the next call
/// into this library from the same thread.
#[no_mangle]
pub extern "C" fn fog_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fog_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default settings for an estimator kind (G/D/1: n_max 10000, 256 lags;
/// queue estimate: kappa 0; simulation: 10^6 slots, seed 1).
#[no_mangle]
pub extern "C" fn fog_method_default(kind: FogMethodKind) -> FogMethod {
    let g = Gd1Config::default();
    let s = SimOptions::default();
    FogMethod {
        kind,
        n_max: g.n_max,
        max_lag: g.max_lag,
        kappa_coeff: 0.0,
        n_slots: s.n_slots,
        seed: s.seed,
    }
}

/// Creates an empty scenario. Release it with `fog_scenario_free`.
#[no_mangle]
pub unsafe extern "C" fn fog_scenario_new(budget: f64, deadline: f64, out: *mut *mut FogScenario) -> FogStatus {
    guard(|| {
        let out = unsafe { deref_mut(out, "out") }?;
        if !(budget.is_finite() && budget > 0.0) {
            return Err(FogError::Parameter(format!("budget must be > 0, got {budget}")).into());
        }
        if !(deadline.is_finite() && deadline >= 0.0) {
            return Err(FogError::Parameter(format!("deadline must be >= 0, got {deadline}")).into());
        }
        *out = Box::into_raw(Box::new(FogScenario {
            budget,
            deadline,
            models: Vec::new(),
        }));
        Ok(())
    })
}

/// Releases a scenario. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fog_scenario_free(s: *mut FogScenario) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

fn add_model(s: *mut FogScenario, m: WorkloadModel) -> FogStatus {
    guard(|| {
        let s = unsafe { deref_mut(s, "scenario") }?;
        m.validate()?;
        s.models.push(m);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fog_scenario_add_gaussian(s: *mut FogScenario, mean: f64, variance: f64) -> FogStatus {
    add_model(s, WorkloadModel::GaussianIid { mean, variance })
}

/// AR(1) cloudlet whose stationary variance is `variance`.
#[no_mangle]
pub unsafe extern "C" fn fog_scenario_add_ar1(s: *mut FogScenario, mean: f64, variance: f64, phi: f64) -> FogStatus {
    add_model(s, WorkloadModel::ar1(mean, variance, phi))
}

#[no_mangle]
pub unsafe extern "C" fn fog_scenario_add_uniform(s: *mut FogScenario, low: f64, high: f64) -> FogStatus {
    add_model(s, WorkloadModel::Uniform { low, high })
}

/// Cloudlet driven by a `timestamp_s,count` request trace.
#[no_mangle]
pub unsafe extern "C" fn fog_scenario_add_trace(
    s: *mut FogScenario,
    path: *const c_char,
    bucket_s: u64,
    cycles_per_task: f64,
) -> FogStatus {
    guard(|| {
        let s = unsafe { deref_mut(s, "scenario") }?;
        let path = unsafe { CStr::from_ptr(deref(path, "path")?) };
        let path = path
            .to_str()
            .map_err(|_| FogError::Parameter("path is not valid UTF-8".into()))?;
        s.models.push(load_trace(path, bucket_s, cycles_per_task)?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fog_scenario_set_deadline(s: *mut FogScenario, deadline: f64) -> FogStatus {
    guard(|| {
        let s = unsafe { deref_mut(s, "scenario") }?;
        if !(deadline.is_finite() && deadline >= 0.0) {
            return Err(FogError::Parameter(format!("deadline must be >= 0, got {deadline}")).into());
        }
        s.deadline = deadline;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fog_scenario_num_cloudlets(s: *const FogScenario, out: *mut usize) -> FogStatus {
    guard(|| {
        let s = unsafe { deref(s, "scenario") }?;
        *unsafe { deref_mut(out, "out") }? = s.models.len();
        Ok(())
    })
}

/// Fluid simulation at one split.
#[no_mangle]
pub unsafe extern "C" fn fog_simulate(
    s: *const FogScenario,
    alpha: f64,
    n_slots: usize,
    seed: u64,
    out: *mut FogSimResult,
) -> FogStatus {
    guard(|| {
        let sc = unsafe { deref(s, "scenario") }?.build()?;
        let out = unsafe { deref_mut(out, "out") }?;
        if n_slots == 0 {
            return Err(FogError::Parameter("n_slots must be >= 1".into()).into());
        }
        let r = fogcap::simulate(&sc, alpha, &SimOptions::new(n_slots, seed))?;
        *out = FogSimResult {
            alpha: r.alpha,
            avg_loss: r.avg_loss,
            loss_probability: r.loss_probability,
            std_err: r.std_err,
            conservation_residual: r.conservation_residual,
        };
        Ok(())
    })
}

/// Sum over cloudlets of the expected per-slot overflow at `alpha`.
#[no_mangle]
pub unsafe extern "C" fn fog_expected_overflow(
    s: *const FogScenario,
    alpha: f64,
    method: *const FogMethod,
    out: *mut f64,
) -> FogStatus {
    guard(|| {
        let sc = unsafe { deref(s, "scenario") }?.build()?;
        let m = to_method(unsafe { deref(method, "method") }?);
        let out = unsafe { deref_mut(out, "out") }?;
        *out = optimizer::expected_overflow_sum(&sc, alpha, &m)?;
        Ok(())
    })
}

/// Expected overflow divided by the deep capacity `C - alpha`.
#[no_mangle]
pub unsafe extern "C" fn fog_fractional_objective(
    s: *const FogScenario,
    alpha: f64,
    method: *const FogMethod,
    out: *mut f64,
) -> FogStatus {
    guard(|| {
        let sc = unsafe { deref(s, "scenario") }?.build()?;
        let m = to_method(unsafe { deref(method, "method") }?);
        let out = unsafe { deref_mut(out, "out") }?;
        *out = optimizer::fractional_objective(&sc, alpha, &m)?;
        Ok(())
    })
}

/// Iterative ratio search for the split. `thresholds` may be NULL; otherwise
/// it holds one loss-probability cap per cloudlet.
#[no_mangle]
pub unsafe extern "C" fn fog_algorithm1(
    s: *const FogScenario,
    method: *const FogMethod,
    epsilon_step: f64,
    grid_points: usize,
    thresholds: *const f64,
    out: *mut FogOptimizeResult,
) -> FogStatus {
    guard(|| {
        let sc = unsafe { deref(s, "scenario") }?.build()?;
        let m = to_method(unsafe { deref(method, "method") }?);
        let out = unsafe { deref_mut(out, "out") }?;
        let thresholds = if thresholds.is_null() {
            None
        } else {
            Some(unsafe { std::slice::from_raw_parts(thresholds, sc.num_cloudlets()) }.to_vec())
        };
        let r = optimizer::algorithm1(
            &sc,
            &m,
            &Algorithm1Options {
                epsilon_step,
                grid_points,
                thresholds,
            },
        )?;
        *out = FogOptimizeResult {
            alpha_star: r.alpha_star,
            objective: r.objective,
            iterations: r.iterations.len(),
            feasible: r.feasible,
        };
        Ok(())
    })
}

/// Interval of `alpha` where the G/D/1 objective is certified convex.
/// `hi_open` is set when the interval is clipped at the budget.
#[no_mangle]
pub unsafe extern "C" fn fog_convexity_range(
    s: *const FogScenario,
    lo: *mut f64,
    hi: *mut f64,
    hi_open: *mut bool,
) -> FogStatus {
    guard(|| {
        let sc = unsafe { deref(s, "scenario") }?.build()?;
        let (lo, hi, hi_open) = unsafe {
            (
                deref_mut(lo, "lo")?,
                deref_mut(hi, "hi")?,
                deref_mut(hi_open, "hi_open")?,
            )
        };
        let r = optimizer::convexity_range(&sc);
        *lo = r.lo;
        *hi = r.hi;
        *hi_open = r.hi_open;
        Ok(())
    })
}

/// `E(X - t)+` for `X ~ N(mean, variance)`.
#[no_mangle]
pub unsafe extern "C" fn fog_stop_loss_gaussian(mean: f64, variance: f64, t: f64, out: *mut f64) -> FogStatus {
    guard(|| {
        let out = unsafe { deref_mut(out, "out") }?;
        *out = stop_loss(&ScalarDistribution::Gaussian { mean, variance }, t)?;
        Ok(())
    })
}

/// `E(X - t)+` for `X ~ U[low, high]`.
#[no_mangle]
pub unsafe extern "C" fn fog_stop_loss_uniform(low: f64, high: f64, t: f64, out: *mut f64) -> FogStatus {
    guard(|| {
        let out = unsafe { deref_mut(out, "out") }?;
        *out = stop_loss(&ScalarDistribution::Uniform { low, high }, t)?;
        Ok(())
    })
}
