//! C ABI over the `sortcycle` library.
//!
//! Objects are opaque handles released with the matching `*_free`. Every
//! fallible function returns a `SortcycleStatus`; on failure the message is
//! available from `sortcycle_last_error` on the same thread. Strings
//! returned by the library are freed with `sortcycle_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sortcycle::dynamics::{self, GridSpec, Policy};
use sortcycle::firms;
use sortcycle::params::{MarkovChain2, ModelParams, ParamsFile, ValidatedParams};
use sortcycle::statics::{self, StaticEquilibrium};
use sortcycle::{AggregateShockState, ModelError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortcycleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    NoRoot = 4,
    UnboundedCapitalDemand = 5,
    NonFinite = 6,
    BracketFailure = 7,
    NoConvergence = 8,
    GridExit = 9,
    InvalidProcess = 10,
    EmptyPanel = 11,
    Panic = 12,
}

impl From<&ModelError> for SortcycleStatus {
    fn from(e: &ModelError) -> Self {
        match e {
            ModelError::Domain { .. } => SortcycleStatus::Domain,
            ModelError::NoRoot(_) => SortcycleStatus::NoRoot,
            ModelError::UnboundedCapitalDemand { .. } => SortcycleStatus::UnboundedCapitalDemand,
            ModelError::NonFinite(_) => SortcycleStatus::NonFinite,
            ModelError::BracketFailure(_) => SortcycleStatus::BracketFailure,
            ModelError::NoConvergence { .. } => SortcycleStatus::NoConvergence,
            ModelError::GridExit { .. } => SortcycleStatus::GridExit,
            ModelError::InvalidProcess(_) => SortcycleStatus::InvalidProcess,
            ModelError::EmptyPanel => SortcycleStatus::EmptyPanel,
        }
    }
}

/// Validated structural parameters and a two-state z chain.
pub struct SortcycleParams {
    params: ValidatedParams,
    chain: MarkovChain2,
}

/// A solved static equilibrium.
pub struct SortcycleEquilibrium {
    eq: StaticEquilibrium,
}

/// A solved consumption-savings policy.
pub struct SortcyclePolicy {
    policy: Policy,
}

/// Cross-sectional variances of log wages, log TFPQ and log TFPR.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SortcycleDispersion {
    pub var_log_wage: f64,
    pub var_log_tfpq: f64,
    pub var_log_tfpr: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(SortcycleStatus, String);

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure(SortcycleStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SortcycleStatus::NullPointer, format!("{what} is null"))
}

fn guard<F>(f: F) -> SortcycleStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SortcycleStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SortcycleStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(SortcycleStatus::InvalidArgument, format!("{what}: {e}")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure(SortcycleStatus::InvalidArgument, e.to_string()))
}

macro_rules! json {
    ($value:expr) => {
        serde_json::to_string($value)
            .map_err(|e| Failure(SortcycleStatus::NonFinite, e.to_string()))
            .and_then(to_c_string)
    };
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn sortcycle_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Built-in calibration with its z chain.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_params_default(out: *mut *mut SortcycleParams) -> SortcycleStatus {
    guard(|| {
        let params = ModelParams::baseline().validate()?;
        let handle = Box::new(SortcycleParams {
            params,
            chain: MarkovChain2::baseline(),
        });
        write_out(out, Box::into_raw(handle), "out")
    })
}

/// Parameters from a JSON document in the parameter-file format; the
/// built-in chain is used when the document has none.
///
/// # Safety
/// `json_text` must be a nul-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_params_from_json(json_text: *const c_char, out: *mut *mut SortcycleParams) -> SortcycleStatus {
    guard(|| {
        let text = read_str(json_text, "json_text")?;
        let file = ParamsFile::from_json(text).map_err(|e| Failure(SortcycleStatus::InvalidArgument, e.to_string()))?;
        let params = file.model().validate()?;
        let chain = file.chain.unwrap_or_else(MarkovChain2::baseline);
        chain.validate()?;
        write_out(out, Box::into_raw(Box::new(SortcycleParams { params, chain })), "out")
    })
}

/// Parameters as a JSON document in the parameter-file format.
///
/// # Safety
/// `params` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_params_to_json(params: *const SortcycleParams, out: *mut *mut c_char) -> SortcycleStatus {
    guard(|| {
        let p = borrow(params, "params")?;
        let file = ParamsFile::new(p.params.into_inner(), Some(p.chain));
        write_out(out, json!(&file)?, "out")
    })
}

/// # Safety
/// `params` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_params_free(params: *mut SortcycleParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Job-distribution rate at market-efficiency level `z`.
///
/// # Safety
/// `params` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_solve_lambda(params: *const SortcycleParams, z: f64, out: *mut f64) -> SortcycleStatus {
    guard(|| {
        let p = borrow(params, "params")?;
        let shock = AggregateShockState::baseline(&p.params, z);
        shock.validate()?;
        write_out(out, statics::solve_lambda(&p.params, &shock)?, "out")
    })
}

/// Static equilibrium at (z, K, A).
///
/// # Safety
/// `params` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_equilibrium_solve(
    params: *const SortcycleParams,
    z: f64,
    k: f64,
    a: f64,
    out: *mut *mut SortcycleEquilibrium,
) -> SortcycleStatus {
    guard(|| {
        let p = borrow(params, "params")?;
        let shock = AggregateShockState::baseline(&p.params, z).with_a(a);
        let eq = statics::solve_static(&p.params, &shock, k)?;
        write_out(out, Box::into_raw(Box::new(SortcycleEquilibrium { eq })), "out")
    })
}

/// # Safety
/// `eq` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_equilibrium_free(eq: *mut SortcycleEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// Writes lambda_t, Y, R and w0.
///
/// # Safety
/// `eq` must be a live handle; `out` must point to four doubles.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_equilibrium_summary(eq: *const SortcycleEquilibrium, out: *mut f64) -> SortcycleStatus {
    guard(|| {
        let e = &borrow(eq, "eq")?.eq;
        if out.is_null() {
            return Err(null("out"));
        }
        let vals = [e.lambda_t, e.y, e.r, e.w0];
        ptr::copy_nonoverlapping(vals.as_ptr(), out, vals.len());
        Ok(())
    })
}

/// Full equilibrium as JSON.
///
/// # Safety
/// `eq` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_equilibrium_to_json(eq: *const SortcycleEquilibrium, out: *mut *mut c_char) -> SortcycleStatus {
    guard(|| {
        let e = &borrow(eq, "eq")?.eq;
        write_out(out, json!(e)?, "out")
    })
}

/// Aggregate TFP, log Y - alpha log K.
///
/// # Safety
/// Both handles must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_measured_tfp(
    params: *const SortcycleParams,
    eq: *const SortcycleEquilibrium,
    out: *mut f64,
) -> SortcycleStatus {
    guard(|| {
        let p = borrow(params, "params")?;
        let e = &borrow(eq, "eq")?.eq;
        write_out(out, statics::measured_tfp(&p.params, e), "out")
    })
}

/// Closed-form cross-sectional variances.
///
/// # Safety
/// Both handles must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_analytic_moments(
    params: *const SortcycleParams,
    eq: *const SortcycleEquilibrium,
    out: *mut SortcycleDispersion,
) -> SortcycleStatus {
    guard(|| {
        let p = borrow(params, "params")?;
        let e = &borrow(eq, "eq")?.eq;
        let m = firms::analytic_moments(&p.params, e);
        let d = SortcycleDispersion {
            var_log_wage: m.var_log_wage,
            var_log_tfpq: m.var_log_tfpq,
            var_log_tfpr: m.var_log_tfpr,
        };
        write_out(out, d, "out")
    })
}

/// Moments of a seeded panel of `n_firms` firms, as JSON.
///
/// # Safety
/// Both handles must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_panel_moments_json(
    params: *const SortcycleParams,
    eq: *const SortcycleEquilibrium,
    n_firms: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> SortcycleStatus {
    guard(|| {
        let p = borrow(params, "params")?;
        let e = &borrow(eq, "eq")?.eq;
        let panel = firms::sample_cross_section(&p.params, e, n_firms, seed)?;
        write_out(out, json!(&firms::cross_section_moments(&panel, e)?)?, "out")
    })
}

/// Policy on a capital grid of `n_nodes` nodes; 0 selects the default.
///
/// # Safety
/// `params` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_policy_solve(
    params: *const SortcycleParams,
    n_nodes: usize,
    out: *mut *mut SortcyclePolicy,
) -> SortcycleStatus {
    guard(|| {
        let p = borrow(params, "params")?;
        let mut grid = GridSpec::default();
        if n_nodes > 0 {
            grid.n_nodes = n_nodes;
        }
        let policy = dynamics::solve_policy(&p.params, &p.chain, 1.0, &grid)?;
        write_out(out, Box::into_raw(Box::new(SortcyclePolicy { policy })), "out")
    })
}

/// # Safety
/// `policy` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_policy_free(policy: *mut SortcyclePolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Next-period capital chosen in z state `state` (0 or 1) at capital `k`.
///
/// # Safety
/// `policy` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_policy_next_capital(
    policy: *const SortcyclePolicy,
    state: usize,
    k: f64,
    out: *mut f64,
) -> SortcycleStatus {
    guard(|| {
        let pol = &borrow(policy, "policy")?.policy;
        if state > 1 {
            return Err(Failure(SortcycleStatus::InvalidArgument, format!("state {state} is not 0 or 1")));
        }
        let (_, _, k_next) = pol.step(state, k, 0)?;
        write_out(out, k_next, "out")
    })
}

/// Simulated path moments as JSON.
///
/// # Safety
/// `policy` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_simulate_moments_json(
    policy: *const SortcyclePolicy,
    t_len: usize,
    burn_in: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> SortcycleStatus {
    guard(|| {
        let pol = &borrow(policy, "policy")?.policy;
        let path = dynamics::simulate(pol, t_len, burn_in, seed)?;
        write_out(out, json!(&dynamics::path_moments(&path)?)?, "out")
    })
}

/// Generalized impulse response to a crisis, as JSON.
///
/// # Safety
/// `policy` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sortcycle_irf_json(
    policy: *const SortcyclePolicy,
    horizon: usize,
    n_sims: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> SortcycleStatus {
    guard(|| {
        let pol = &borrow(policy, "policy")?.policy;
        let irf = dynamics::impulse_response(pol, horizon, n_sims, seed)?;
        write_out(out, json!(&irf)?, "out")
    })
}
