//! C ABI over `ewmask`.
//!
//! Every fallible function returns an [`EwmaskStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be read with [`ewmask_last_error_message`]. Estimation results that carry
//! paths are returned as opaque handles that the caller releases with the
//! matching `*_free` function. Panics never cross the boundary; they surface
//! as `EWMASK_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chrono::NaiveDate;

use ewmask::backtest::{self, Zone};
use ewmask::ewma::{estimate_ewma_sk_with, DecayParams, EwmaSkOptions, MomentPath};
use ewmask::garch::estimate_garch;
use ewmask::gram_charlier::{gc_density, ShapePair};
use ewmask::ingest::{compute_log_returns, split_sample, PriceSeries, ReturnSeries};
use ewmask::var_engine::{cornish_fisher_quantile_with, rescale_moments, CfVariant};
use ewmask::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwmaskStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InputError = 3,
    EstimationFailed = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwmaskZone {
    Green = 0,
    Yellow = 1,
    Red = 2,
}

impl From<Zone> for EwmaskZone {
    fn from(z: Zone) -> Self {
        match z {
            Zone::Green => EwmaskZone::Green,
            Zone::Yellow => EwmaskZone::Yellow,
            Zone::Red => EwmaskZone::Red,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EwmaskLrTest {
    pub statistic: f64,
    pub p_value: f64,
}

impl From<backtest::LrTest> for EwmaskLrTest {
    fn from(t: backtest::LrTest) -> Self {
        Self {
            statistic: t.statistic,
            p_value: t.p_value,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaskBaselZone {
    pub zone: EwmaskZone,
    pub violations: u64,
    pub multiplier: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EwmaskMoments {
    pub mu: f64,
    pub sigma: f64,
    pub skew: f64,
    pub kurt: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EwmaskGarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub log_likelihood: f64,
}

/// `t_stats` entries are NaN when the Hessian could not be inverted.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EwmaskDecayParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub mu: f64,
    pub log_likelihood: f64,
    pub t_stats: [f64; 3],
}

/// Backtest of one VaR series. `first_failure` is 0 when there was no hit,
/// in which case `tuff` is all zeros.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaskBacktestSummary {
    pub observations: u64,
    pub violations: u64,
    pub failure_pct: f64,
    pub first_failure: u64,
    pub tuff: EwmaskLrTest,
    pub uc: EwmaskLrTest,
    pub ind: EwmaskLrTest,
    pub cc: EwmaskLrTest,
    pub basel: EwmaskBaselZone,
}

/// Return series with its in-sample/out-of-sample split.
pub struct EwmaskReturns {
    inner: ReturnSeries,
}

/// EWMA-SK estimate together with its in-sample moment path.
pub struct EwmaskEwmaSkFit {
    params: DecayParams,
    path: MomentPath,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(EwmaskStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::ZeroVariance | Error::NonConvergence { .. } | Error::NonFiniteStart => {
                EwmaskStatus::EstimationFailed
            }
            Error::InvalidParameter { .. } => EwmaskStatus::InvalidArgument,
            _ => EwmaskStatus::InputError,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(EwmaskStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, records any failure or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EwmaskStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EwmaskStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {message}"));
            EwmaskStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(data: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn handle<'a, T>(h: *const T, name: &str) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| null(name))
}

/// Raw arrays carry no dates; observations are stamped on consecutive days.
fn dated(values: &[f64]) -> Result<ReturnSeries, Failure> {
    let start = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
    Ok(ReturnSeries::from_values(start, values)?)
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ewmask_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ewmask_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ewmask_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Cornish-Fisher standardized loss quantile at tail probability `alpha`.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_cornish_fisher_quantile(
    alpha: f64,
    skew: f64,
    kurt: f64,
    raw_kurtosis: bool,
    full: bool,
    out: *mut f64,
) -> EwmaskStatus {
    guard(|| {
        let shape = ShapePair::new(skew, kurt)?;
        let variant = CfVariant { raw_kurtosis, full };
        write(
            out,
            cornish_fisher_quantile_with(alpha, shape, variant)?,
            "out",
        )
    })
}

/// Squared Gram-Charlier density at `x`.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_gc_density(
    x: f64,
    skew: f64,
    kurt: f64,
    out: *mut f64,
) -> EwmaskStatus {
    guard(|| {
        let shape = ShapePair::new(skew, kurt)?;
        write(out, gc_density(x, shape).density, "out")
    })
}

/// Moments of the sum of `x` i.i.d. daily increments.
///
/// # Safety
/// `out` must be valid for a write of one `EwmaskMoments`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_rescale_moments(
    mu: f64,
    sigma: f64,
    skew: f64,
    kurt: f64,
    x: u32,
    out: *mut EwmaskMoments,
) -> EwmaskStatus {
    guard(|| {
        let m = rescale_moments(mu, sigma, skew, kurt, x)?;
        let value = EwmaskMoments {
            mu: m.mu,
            sigma: m.sigma,
            skew: m.skew,
            kurt: m.kurt,
        };
        write(out, value, "out")
    })
}

/// Kupiec unconditional coverage test.
///
/// # Safety
/// `out` must be valid for a write of one `EwmaskLrTest`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_lr_uc(
    n0: u64,
    n1: u64,
    p: f64,
    out: *mut EwmaskLrTest,
) -> EwmaskStatus {
    guard(|| write(out, backtest::lr_uc(n0, n1, p)?.into(), "out"))
}

/// Christoffersen independence test from transition counts.
///
/// # Safety
/// `out` must be valid for a write of one `EwmaskLrTest`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_lr_ind(
    n00: u64,
    n01: u64,
    n10: u64,
    n11: u64,
    out: *mut EwmaskLrTest,
) -> EwmaskStatus {
    guard(|| write(out, backtest::lr_ind(n00, n01, n10, n11)?.into(), "out"))
}

/// Conditional coverage: `uc + ind` referred to chi-square(2).
///
/// # Safety
/// `out` must be valid for a write of one `EwmaskLrTest`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_lr_cc(uc: f64, ind: f64, out: *mut EwmaskLrTest) -> EwmaskStatus {
    guard(|| write(out, backtest::lr_cc(uc, ind)?.into(), "out"))
}

/// Time-until-first-failure test for a first hit at 1-based `index`.
///
/// # Safety
/// `out` must be valid for a write of one `EwmaskLrTest`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_lr_tuff(
    index: u64,
    alpha: f64,
    out: *mut EwmaskLrTest,
) -> EwmaskStatus {
    guard(|| {
        let index = usize::try_from(index).map_err(|_| {
            Failure(
                EwmaskStatus::InvalidArgument,
                format!("index {index} out of range"),
            )
        })?;
        write(out, backtest::lr_tuff(index, alpha)?.into(), "out")
    })
}

/// Basel traffic-light zone and capital multiplier for a violation count.
///
/// # Safety
/// `out` must be valid for a write of one `EwmaskBaselZone`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_basel_zone(
    violations: i64,
    out: *mut EwmaskBaselZone,
) -> EwmaskStatus {
    guard(|| {
        let b = backtest::basel_zone(violations)?;
        let value = EwmaskBaselZone {
            zone: b.zone.into(),
            violations: b.violations,
            multiplier: b.multiplier,
        };
        write(out, value, "out")
    })
}

/// Full backtest of `len` aligned (return, VaR loss) pairs at level `alpha`.
///
/// # Safety
/// `returns` and `var_losses` must each point to `len` readable doubles;
/// `out` must be valid for a write of one `EwmaskBacktestSummary`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_backtest(
    returns: *const f64,
    var_losses: *const f64,
    len: usize,
    alpha: f64,
    out: *mut EwmaskBacktestSummary,
) -> EwmaskStatus {
    guard(|| {
        let r = slice(returns, len, "returns")?;
        let v = slice(var_losses, len, "var_losses")?;
        let realized = dated(r)?;
        let query = ewmask::var_engine::VaRQuery::new(alpha, 1, ewmask::var_engine::ModelTag::Hs)?;
        let mut series = ewmask::var_engine::VaRSeries::new(query);
        for (p, &loss) in realized.observations().iter().zip(v) {
            series.entries.push(ewmask::var_engine::VaRPoint {
                date: p.date,
                var_loss: loss,
            });
        }
        let report = backtest::run_backtest(realized.observations(), &series)?;
        let (first_failure, tuff) = match report.lr_tuff {
            backtest::TuffOutcome::Failure { index, test } => (index as u64, test.into()),
            backtest::TuffOutcome::NoExceptions => (0, EwmaskLrTest::default()),
        };
        let value = EwmaskBacktestSummary {
            observations: report.observations as u64,
            violations: report.violations,
            failure_pct: report.failure_pct,
            first_failure,
            tuff,
            uc: report.lr_uc.into(),
            ind: report.lr_ind.into(),
            cc: report.lr_cc.into(),
            basel: EwmaskBaselZone {
                zone: report.basel_zone.zone.into(),
                violations: report.basel_zone.violations,
                multiplier: report.basel_zone.multiplier,
            },
        };
        write(out, value, "out")
    })
}

/// Wraps `len` percent returns, holding out the last `out_of_sample`.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be valid for a
/// write of one pointer. Release the handle with [`ewmask_returns_free`].
#[no_mangle]
pub unsafe extern "C" fn ewmask_returns_from_values(
    values: *const f64,
    len: usize,
    out_of_sample: usize,
    out: *mut *mut EwmaskReturns,
) -> EwmaskStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let series = dated(slice(values, len, "values")?)?;
        let inner = split_sample(&series, out_of_sample)?;
        out.write(Box::into_raw(Box::new(EwmaskReturns { inner })));
        Ok(())
    })
}

/// Reads a `date,price` CSV, converts to percent log returns and holds out
/// the last `out_of_sample`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for a write
/// of one pointer. Release the handle with [`ewmask_returns_free`].
#[no_mangle]
pub unsafe extern "C" fn ewmask_returns_from_csv(
    path: *const c_char,
    out_of_sample: usize,
    out: *mut *mut EwmaskReturns,
) -> EwmaskStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(EwmaskStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let prices = PriceSeries::from_csv_path(path)?;
        let inner = split_sample(&compute_log_returns(&prices)?, out_of_sample)?;
        out.write(Box::into_raw(Box::new(EwmaskReturns { inner })));
        Ok(())
    })
}

/// Number of returns (in-sample plus out-of-sample) in the handle; 0 for NULL.
///
/// # Safety
/// `returns` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewmask_returns_len(returns: *const EwmaskReturns) -> usize {
    returns.as_ref().map_or(0, |r| r.inner.len())
}

/// Number of in-sample returns; 0 for NULL.
///
/// # Safety
/// `returns` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewmask_returns_in_sample_len(returns: *const EwmaskReturns) -> usize {
    returns.as_ref().map_or(0, |r| r.inner.split_index())
}

/// # Safety
/// `returns` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ewmask_returns_free(returns: *mut EwmaskReturns) {
    if !returns.is_null() {
        drop(Box::from_raw(returns));
    }
}

/// GARCH(1,1)-Normal maximum-likelihood fit on the in-sample part.
///
/// # Safety
/// `returns` must be a live handle; `out` must be valid for a write of one
/// `EwmaskGarchParams`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_garch_fit(
    returns: *const EwmaskReturns,
    out: *mut EwmaskGarchParams,
) -> EwmaskStatus {
    guard(|| {
        let r = handle(returns, "returns")?;
        let p = estimate_garch(&r.inner)?;
        let value = EwmaskGarchParams {
            mu: p.mu,
            omega: p.omega,
            alpha: p.alpha,
            beta: p.beta,
            log_likelihood: p.log_likelihood,
        };
        write(out, value, "out")
    })
}

/// EWMA-SK maximum-likelihood fit on the in-sample part. With `pin_mu` the
/// mean is fixed at the in-sample average.
///
/// # Safety
/// `returns` must be a live handle; `out` must be valid for a write of one
/// pointer. Release the result with [`ewmask_ewma_sk_free`].
#[no_mangle]
pub unsafe extern "C" fn ewmask_ewma_sk_fit(
    returns: *const EwmaskReturns,
    pin_mu: bool,
    out: *mut *mut EwmaskEwmaSkFit,
) -> EwmaskStatus {
    guard(|| {
        let r = handle(returns, "returns")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let values = r.inner.in_sample_values();
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        let options = EwmaSkOptions {
            pin_mu: pin_mu.then_some(mean),
            ..EwmaSkOptions::default()
        };
        let (params, path) = estimate_ewma_sk_with(&r.inner, &options)?;
        out.write(Box::into_raw(Box::new(EwmaskEwmaSkFit { params, path })));
        Ok(())
    })
}

/// # Safety
/// `fit` must be a live handle; `out` must be valid for a write of one
/// `EwmaskDecayParams`.
#[no_mangle]
pub unsafe extern "C" fn ewmask_ewma_sk_params(
    fit: *const EwmaskEwmaSkFit,
    out: *mut EwmaskDecayParams,
) -> EwmaskStatus {
    guard(|| {
        let p = handle(fit, "fit")?.params;
        let value = EwmaskDecayParams {
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            lambda3: p.lambda3,
            mu: p.mu,
            log_likelihood: p.log_likelihood,
            t_stats: p.t_stats.map(|t| t.unwrap_or(f64::NAN)),
        };
        write(out, value, "out")
    })
}

/// Length of the in-sample moment path; 0 for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewmask_ewma_sk_path_len(fit: *const EwmaskEwmaSkFit) -> usize {
    fit.as_ref().map_or(0, |f| f.path.len())
}

/// Copies the moment path into caller buffers of `capacity` doubles each.
/// Any of the three buffers may be NULL to skip it.
///
/// # Safety
/// `fit` must be a live handle; each non-NULL buffer must be writable for
/// `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ewmask_ewma_sk_path_copy(
    fit: *const EwmaskEwmaSkFit,
    variance: *mut f64,
    third: *mut f64,
    fourth: *mut f64,
    capacity: usize,
) -> EwmaskStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        let n = f.path.len();
        if capacity < n {
            return Err(Failure(
                EwmaskStatus::InvalidArgument,
                format!("capacity {capacity} is below the path length {n}"),
            ));
        }
        for (i, e) in f.path.entries().iter().enumerate() {
            if !variance.is_null() {
                variance.add(i).write(e.state.variance);
            }
            if !third.is_null() {
                third.add(i).write(e.state.third);
            }
            if !fourth.is_null() {
                fourth.add(i).write(e.state.fourth);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `fit` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ewmask_ewma_sk_free(fit: *mut EwmaskEwmaSkFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
