//! C ABI over the `qrhd` core.
//!
//! Every fallible call returns a [`QrhdStatus`]; on failure the message is
//! kept per thread and can be read with [`qrhd_last_error`]. Objects are
//! opaque handles created by `*_new`/`*_from_*` functions and released with
//! the matching `*_free`. Arrays are caller-allocated; functions that fill
//! them take the capacity and fail with `QRHD_STATUS_BUFFER_TOO_SMALL` when
//! it is short.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::DMatrix;
use qrhd::config::ExperimentConfig;
use qrhd::evolve::{evolve, init_state, EvolutionTrace};
use qrhd::geometry::{Domain, MetricChart, Pole};
use qrhd::semiclassical::{convergence_bound, lambert_w_minus1};
use qrhd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrhdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    BufferTooSmall = 3,
    Config = 4,
    Parameter = 5,
    Domain = 6,
    Numeric = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrhdPole {
    North = 0,
    South = 1,
}

/// Opaque chart handle.
pub struct QrhdChart(MetricChart);

/// Opaque parsed experiment.
pub struct QrhdExperiment(ExperimentConfig);

/// Opaque result of one evolution.
pub struct QrhdTrace(EvolutionTrace);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(e: &Error) -> QrhdStatus {
    match e {
        Error::Config(_) => QrhdStatus::Config,
        Error::Parameter(_) | Error::Schedule(_) => QrhdStatus::Parameter,
        Error::Domain { .. } | Error::PoleSingularity { .. } | Error::DomainExit { .. } => QrhdStatus::Domain,
        Error::Io(_) => QrhdStatus::Io,
        _ => QrhdStatus::Numeric,
    }
}

fn guard(body: impl FnOnce() -> Result<(), QrhdStatus>) -> QrhdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => QrhdStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("panic inside qrhd".into());
            QrhdStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, QrhdStatus>;
}

impl<T> OrStatus<T> for qrhd::Result<T> {
    fn or_status(self) -> Result<T, QrhdStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], QrhdStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        set_error("null array".into());
        return Err(QrhdStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T) -> Result<&'a T, QrhdStatus> {
    ptr.as_ref().ok_or_else(|| {
        set_error("null handle".into());
        QrhdStatus::NullPointer
    })
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), QrhdStatus> {
    if out.is_null() {
        set_error("null output pointer".into());
        return Err(QrhdStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

unsafe fn fill(out: *mut f64, capacity: usize, values: &[f64]) -> Result<(), QrhdStatus> {
    if capacity < values.len() {
        set_error(format!("buffer holds {capacity} values, {} needed", values.len()));
        return Err(QrhdStatus::BufferTooSmall);
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        set_error("null output buffer".into());
        return Err(QrhdStatus::NullPointer);
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `capacity`. Returns the full message length in bytes.
///
/// # Safety
/// `buffer` must point to `capacity` writable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn qrhd_last_error(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        if !buffer.is_null() && capacity > 0 {
            let n = message.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(message.as_ptr().cast::<c_char>(), buffer, n);
            *buffer.add(n) = 0;
        }
        message.len()
    })
}

/// Flat chart on the box `[lo, hi]` of dimension `dim`.
///
/// # Safety
/// `lo` and `hi` must hold `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrhd_chart_flat(dim: usize, lo: *const f64, hi: *const f64, out: *mut *mut QrhdChart) -> QrhdStatus {
    guard(|| {
        let domain = Domain::new(slice(lo, dim)?.to_vec(), slice(hi, dim)?.to_vec()).or_status()?;
        let chart = MetricChart::flat(dim, domain).or_status()?;
        write_out(out, Box::into_raw(Box::new(QrhdChart(chart))))
    })
}

/// Constant-metric chart; `metric` is `dim × dim`, row-major, symmetric
/// positive definite.
///
/// # Safety
/// `metric` must hold `dim²` values, `lo` and `hi` `dim` each.
#[no_mangle]
pub unsafe extern "C" fn qrhd_chart_constant(
    dim: usize,
    metric: *const f64,
    lo: *const f64,
    hi: *const f64,
    out: *mut *mut QrhdChart,
) -> QrhdStatus {
    guard(|| {
        let g = DMatrix::from_row_slice(dim, dim, slice(metric, dim * dim)?);
        let domain = Domain::new(slice(lo, dim)?.to_vec(), slice(hi, dim)?.to_vec()).or_status()?;
        let chart = MetricChart::constant(g, domain).or_status()?;
        write_out(out, Box::into_raw(Box::new(QrhdChart(chart))))
    })
}

/// Stereographic chart of the sphere of `radius` in `R^ambient_dim`, on the
/// default box `[−radius, radius]^(ambient_dim−1)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrhd_chart_sphere(pole: QrhdPole, ambient_dim: usize, radius: f64, out: *mut *mut QrhdChart) -> QrhdStatus {
    guard(|| {
        let pole = match pole {
            QrhdPole::North => Pole::North,
            QrhdPole::South => Pole::South,
        };
        let chart = MetricChart::sphere(pole, ambient_dim, radius).or_status()?;
        write_out(out, Box::into_raw(Box::new(QrhdChart(chart))))
    })
}

/// # Safety
/// `chart` must come from a `qrhd_chart_*` constructor and not be used after.
#[no_mangle]
pub unsafe extern "C" fn qrhd_chart_free(chart: *mut QrhdChart) {
    if !chart.is_null() {
        drop(Box::from_raw(chart));
    }
}

/// Chart dimension, or 0 for a null handle.
///
/// # Safety
/// `chart` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qrhd_chart_dim(chart: *const QrhdChart) -> usize {
    chart.as_ref().map_or(0, |c| c.0.dim())
}

/// Ricci scalar at `point`.
///
/// # Safety
/// `point` must hold `qrhd_chart_dim(chart)` values.
#[no_mangle]
pub unsafe extern "C" fn qrhd_chart_ricci_scalar(chart: *const QrhdChart, point: *const f64, out: *mut f64) -> QrhdStatus {
    guard(|| {
        let chart = &handle(chart)?.0;
        let r = chart.ricci_scalar(slice(point, chart.dim())?).or_status()?;
        write_out(out, r)
    })
}

/// Christoffel symbols at `point` into `out[(k·n + i)·n + j] = Γ^k_{ij}`.
///
/// # Safety
/// `point` must hold `n` values and `out` `capacity` writable values.
#[no_mangle]
pub unsafe extern "C" fn qrhd_chart_christoffel(
    chart: *const QrhdChart,
    point: *const f64,
    out: *mut f64,
    capacity: usize,
) -> QrhdStatus {
    guard(|| {
        let chart = &handle(chart)?.0;
        let n = chart.dim();
        let gamma = chart.christoffel(slice(point, n)?).or_status()?;
        let mut values = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    values.push(gamma.get(k, i, j));
                }
            }
        }
        fill(out, capacity, &values)
    })
}

/// Operator-ordering corrections `(ΔV, ΔV′)` for mass `mass`.
///
/// # Safety
/// `point` must hold `n` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrhd_chart_corrections(
    chart: *const QrhdChart,
    point: *const f64,
    mass: f64,
    delta_v: *mut f64,
    delta_v_prime: *mut f64,
) -> QrhdStatus {
    guard(|| {
        let chart = &handle(chart)?.0;
        let (dv, dvp) = chart.quantum_corrections(slice(point, chart.dim())?, mass).or_status()?;
        write_out(delta_v, dv)?;
        write_out(delta_v_prime, dvp)
    })
}

/// Ambient point of a sphere-chart coordinate.
///
/// # Safety
/// `point` must hold `n` values and `out` `capacity` writable values.
#[no_mangle]
pub unsafe extern "C" fn qrhd_chart_embed(chart: *const QrhdChart, point: *const f64, out: *mut f64, capacity: usize) -> QrhdStatus {
    guard(|| {
        let chart = &handle(chart)?.0;
        let x = chart.embed(slice(point, chart.dim())?).or_status()?;
        fill(out, capacity, &x)
    })
}

/// Parses and validates a TOML experiment description.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrhd_experiment_from_toml(toml: *const c_char, out: *mut *mut QrhdExperiment) -> QrhdStatus {
    guard(|| {
        if toml.is_null() {
            set_error("null config text".into());
            return Err(QrhdStatus::NullPointer);
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| {
            set_error(e.to_string());
            QrhdStatus::InvalidUtf8
        })?;
        let config = ExperimentConfig::from_toml(text).or_status()?;
        write_out(out, Box::into_raw(Box::new(QrhdExperiment(config))))
    })
}

/// # Safety
/// `experiment` must come from [`qrhd_experiment_from_toml`] and not be used after.
#[no_mangle]
pub unsafe extern "C" fn qrhd_experiment_free(experiment: *mut QrhdExperiment) {
    if !experiment.is_null() {
        drop(Box::from_raw(experiment));
    }
}

/// Number of charts in the experiment, or 0 for a null handle.
///
/// # Safety
/// `experiment` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qrhd_experiment_chart_count(experiment: *const QrhdExperiment) -> usize {
    experiment.as_ref().map_or(0, |e| e.0.charts.len())
}

/// Evolves the experiment's initial state on chart `chart_index`.
///
/// # Safety
/// `experiment` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrhd_experiment_run(
    experiment: *const QrhdExperiment,
    chart_index: usize,
    out: *mut *mut QrhdTrace,
) -> QrhdStatus {
    guard(|| {
        let config = &handle(experiment)?.0;
        let prepared = config.prepare().or_status()?;
        let Some(p) = prepared.get(chart_index) else {
            set_error(format!("chart index {chart_index} out of range ({} charts)", prepared.len()));
            return Err(QrhdStatus::Parameter);
        };
        let schedule = config.schedule.build().or_status()?;
        let psi = init_state(&p.grid, &p.chart, &config.initial).or_status()?;
        let trace = evolve(&p.chart, &p.grid, &p.potential, &schedule, &psi, &config.evolve_options()).or_status()?;
        write_out(out, Box::into_raw(Box::new(QrhdTrace(trace))))
    })
}

/// # Safety
/// `trace` must come from [`qrhd_experiment_run`] and not be used after.
#[no_mangle]
pub unsafe extern "C" fn qrhd_trace_free(trace: *mut QrhdTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of recorded time steps, or 0 for a null handle.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qrhd_trace_len(trace: *const QrhdTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.times.len())
}

/// Coordinates per recorded position, or 0 for a null handle.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qrhd_trace_dim(trace: *const QrhdTrace) -> usize {
    trace.as_ref().and_then(|t| t.0.mean_position.first()).map_or(0, Vec::len)
}

/// Sample times into `out`.
///
/// # Safety
/// `out` must hold `capacity` writable values.
#[no_mangle]
pub unsafe extern "C" fn qrhd_trace_times(trace: *const QrhdTrace, out: *mut f64, capacity: usize) -> QrhdStatus {
    guard(|| fill(out, capacity, &handle(trace)?.0.times))
}

/// `⟨x⟩(t)` row-major, `len × dim` values.
///
/// # Safety
/// `out` must hold `capacity` writable values.
#[no_mangle]
pub unsafe extern "C" fn qrhd_trace_mean_position(trace: *const QrhdTrace, out: *mut f64, capacity: usize) -> QrhdStatus {
    guard(|| {
        let flat: Vec<f64> = handle(trace)?.0.mean_position.concat();
        fill(out, capacity, &flat)
    })
}

/// `max_t |‖ψ(t)‖ − 1|`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrhd_trace_max_norm_drift(trace: *const QrhdTrace, out: *mut f64) -> QrhdStatus {
    guard(|| write_out(out, handle(trace)?.0.max_norm_drift()))
}

/// Lower branch `W₋₁(z)` for `z ∈ [−1/e, 0)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrhd_lambert_w_minus1(z: f64, out: *mut f64) -> QrhdStatus {
    guard(|| write_out(out, lambert_w_minus1(z).or_status()?))
}

/// Critically damped lower bound on the convergence time and the friction
/// rate attaining it.
///
/// # Safety
/// Outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrhd_convergence_bound(
    lambda_eff: f64,
    eta: f64,
    mass: f64,
    epsilon_star: f64,
    t_bound: *mut f64,
    gamma_opt: *mut f64,
) -> QrhdStatus {
    guard(|| {
        let (t, g) = convergence_bound(lambda_eff, eta, mass, epsilon_star).or_status()?;
        write_out(t_bound, t)?;
        write_out(gamma_opt, g)
    })
}
