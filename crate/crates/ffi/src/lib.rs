//! C interface to `riskdp`.
//!
//! Objects cross the boundary as opaque handles created by `rdp_*_new` or
//! `rdp_*_from_json` and released with the matching `rdp_*_free`. Every
//! fallible call returns an [`RdpStatus`]; on failure the message and code of
//! the error are available from [`rdp_last_error_message`] and
//! [`rdp_last_error_code`] until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use riskdp::mdp::{mdp_value_iteration, solve_mdp_finite, MdpModel};
use riskdp::risk::{evaluate, robust_evaluate};
use riskdp::saddle::{analyze, PsiMatrix};
use riskdp::soc::{soc_value_iteration, solve_soc_finite, SocModel};
use riskdp::{DpSolution, Error, FiniteDistribution, RiskSpec, StageRiskProfile, ValueIteration};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    DomainError = 4,
    MaxIterExceeded = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdpRiskKind {
    Expectation = 0,
    /// Parameter: alpha.
    ValueAtRisk = 1,
    /// Parameter: alpha.
    AverageValueAtRisk = 2,
    /// Parameter: tau.
    Entropic = 3,
}

/// Finite distribution handle.
pub struct RdpDistribution(FiniteDistribution);

/// Control model or decision process handle.
pub enum RdpModel {
    Soc(SocModel),
    Mdp(MdpModel),
}

/// Solver output handle.
pub enum RdpSolution {
    Finite(DpSolution),
    Stationary(ValueIteration),
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RdpSaddleReport {
    pub primal: f64,
    pub dual: f64,
    pub randomized: f64,
    pub gap: f64,
    /// Nonzero when `saddle_row`/`saddle_col` hold a verified saddle point.
    pub has_saddle: u8,
    pub saddle_row: usize,
    pub saddle_col: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<(CString, &'static str)> = RefCell::new((CString::default(), ""));
}

fn set_error(code: &'static str, message: String) {
    let msg = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = (msg, code));
}

enum Fail {
    Null(&'static str),
    Utf8,
    Parse(String),
    Domain(Error),
    Small { needed: usize },
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Domain(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RdpStatus::Ok,
        Ok(Err(fail)) => match fail {
            Fail::Null(what) => {
                set_error("null_pointer", format!("{what} is null"));
                RdpStatus::NullPointer
            }
            Fail::Utf8 => {
                set_error("invalid_utf8", "string argument is not valid UTF-8".into());
                RdpStatus::InvalidUtf8
            }
            Fail::Parse(m) => {
                set_error("parse_error", m);
                RdpStatus::ParseError
            }
            Fail::Small { needed } => {
                set_error("buffer_too_small", format!("buffer needs {needed} entries"));
                RdpStatus::BufferTooSmall
            }
            Fail::Domain(e) => {
                let status = match e {
                    Error::MaxIterExceeded { .. } => RdpStatus::MaxIterExceeded,
                    _ => RdpStatus::DomainError,
                };
                set_error(e.code(), e.to_string());
                status
            }
        },
        Err(_) => {
            set_error("panic", "internal panic".into());
            RdpStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8)
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

fn risk_spec(kind: RdpRiskKind, param: f64) -> Result<RiskSpec, Fail> {
    let r = match kind {
        RdpRiskKind::Expectation => RiskSpec::Expectation,
        RdpRiskKind::ValueAtRisk => RiskSpec::VaR { alpha: param },
        RdpRiskKind::AverageValueAtRisk => RiskSpec::AVaR { alpha: param },
        RdpRiskKind::Entropic => RiskSpec::Entropic { tau: param },
    };
    r.validate()?;
    Ok(r)
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last error on this thread; empty if none. Owned by the library.
#[no_mangle]
pub extern "C" fn rdp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().0.as_ptr())
}

/// Machine-readable code of the last error on this thread; empty if none.
#[no_mangle]
pub extern "C" fn rdp_last_error_code() -> *const c_char {
    let code = LAST_ERROR.with(|e| e.borrow().1);
    // codes are short ASCII identifiers; keep one NUL-terminated copy per code
    thread_local! {
        static CODE: RefCell<CString> = RefCell::new(CString::default());
    }
    CODE.with(|c| {
        *c.borrow_mut() = CString::new(code).unwrap_or_default();
        c.borrow().as_ptr()
    })
}

/// Builds a distribution from `len` atoms and probabilities.
///
/// # Safety
/// `atoms` and `probs` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdp_distribution_new(
    atoms: *const f64,
    probs: *const f64,
    len: usize,
    out: *mut *mut RdpDistribution,
) -> RdpStatus {
    guard(|| {
        let a = slice_arg(atoms, len, "atoms")?;
        let p = slice_arg(probs, len, "probs")?;
        let d = FiniteDistribution::new(a.to_vec(), p.to_vec())?;
        write_out(out, Box::into_raw(Box::new(RdpDistribution(d))), "out")
    })
}

/// # Safety
/// `dist` must come from `rdp_distribution_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rdp_distribution_free(dist: *mut RdpDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Number of atoms after merging duplicates; 0 for a null handle.
///
/// # Safety
/// `dist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdp_distribution_len(dist: *const RdpDistribution) -> usize {
    dist.as_ref().map_or(0, |d| d.0.len())
}

/// `P(Z <= z)`.
///
/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rdp_distribution_cdf(
    dist: *const RdpDistribution,
    z: f64,
    out: *mut f64,
) -> RdpStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        write_out(out, d.0.cdf(z), "out")
    })
}

/// Risk of `dist` under the functional `kind` with parameter `param`
/// (ignored for the expectation).
///
/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rdp_risk_evaluate(
    dist: *const RdpDistribution,
    kind: RdpRiskKind,
    param: f64,
    out: *mut f64,
) -> RdpStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        let v = evaluate(&risk_spec(kind, param)?, &d.0)?;
        write_out(out, v, "out")
    })
}

/// Worst case over `count` distributions; `out_index` receives the first
/// maximizing member.
///
/// # Safety
/// `dists` must point to `count` live handles; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn rdp_robust_evaluate(
    dists: *const *const RdpDistribution,
    count: usize,
    kind: RdpRiskKind,
    param: f64,
    out_value: *mut f64,
    out_index: *mut usize,
) -> RdpStatus {
    guard(|| {
        let handles = slice_arg(dists, count, "dists")?;
        let members = handles
            .iter()
            .map(|&h| deref(h, "dists[i]").map(|d| d.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let (v, i) = robust_evaluate(&risk_spec(kind, param)?, &members)?;
        write_out(out_value, v, "out_value")?;
        write_out(out_index, i, "out_index")
    })
}

/// Parses a control model (has a `"phi"` table) or a decision process (has a
/// `"kernels"` table) from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rdp_model_from_json(json: *const c_char, out: *mut *mut RdpModel) -> RdpStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Fail::Parse(e.to_string()))?;
        let typed = |v: serde_json::Value| -> Result<RdpModel, Fail> {
            let parse_err = |e: serde_json::Error| match riskdp::error::take_validation_error() {
                Some(err) => Fail::Domain(err),
                None => Fail::Parse(e.to_string()),
            };
            riskdp::error::take_validation_error();
            if v.get("phi").is_some() {
                serde_json::from_value(v).map(RdpModel::Soc).map_err(parse_err)
            } else if v.get("kernels").is_some() {
                serde_json::from_value(v).map(RdpModel::Mdp).map_err(parse_err)
            } else {
                Err(Fail::Parse("model needs a \"phi\" or \"kernels\" table".into()))
            }
        };
        let model = typed(value)?;
        write_out(out, Box::into_raw(Box::new(model)), "out")
    })
}

/// # Safety
/// `model` must come from `rdp_model_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rdp_model_free(model: *mut RdpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Solves a model. `profile` is a comma-separated list such as
/// `"avar:0.1,expectation"` (one entry is broadcast over stages; discounted
/// models take exactly one). `tol` and `max_iter` apply to discounted models.
///
/// # Safety
/// `model` must be a live handle, `profile` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rdp_model_solve(
    model: *const RdpModel,
    profile: *const c_char,
    tol: f64,
    max_iter: usize,
    out: *mut *mut RdpSolution,
) -> RdpStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let profile: StageRiskProfile = str_arg(profile, "profile")?.parse()?;
        let single = || match profile.specs() {
            [r] => Ok(*r),
            _ => Err(Error::InvalidProfile(
                "a discounted model takes a single risk functional".into(),
            )),
        };
        let sol = match m {
            RdpModel::Soc(s) if s.discount().is_none() => {
                RdpSolution::Finite(solve_soc_finite(s, &profile.fit(s.stages())?)?)
            }
            RdpModel::Soc(s) => RdpSolution::Stationary(soc_value_iteration(s, &single()?, tol, max_iter)?),
            RdpModel::Mdp(d) if d.discount().is_none() => {
                RdpSolution::Finite(solve_mdp_finite(d, &profile.fit(d.stages())?)?)
            }
            RdpModel::Mdp(d) => RdpSolution::Stationary(mdp_value_iteration(d, &single()?, tol, max_iter)?),
        };
        write_out(out, Box::into_raw(Box::new(sol)), "out")
    })
}

/// # Safety
/// `solution` must come from `rdp_model_solve` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rdp_solution_free(solution: *mut RdpSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

impl RdpSolution {
    fn values(&self, layer: usize) -> Option<&[f64]> {
        match self {
            RdpSolution::Finite(s) => s.values.get(layer).map(|v| v.values()),
            RdpSolution::Stationary(v) => (layer == 0).then(|| v.value.values()),
        }
    }

    fn policy(&self, stage: usize) -> Option<&[usize]> {
        match self {
            RdpSolution::Finite(s) => s.policy.get(stage).map(|p| p.actions()),
            RdpSolution::Stationary(v) => (stage == 0).then(|| v.policy.actions()),
        }
    }
}

/// Number of value layers: `T + 1` for a finite horizon (the last is the
/// terminal cost), 1 for a discounted model. 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdp_solution_layers(solution: *const RdpSolution) -> usize {
    match solution.as_ref() {
        Some(RdpSolution::Finite(s)) => s.values.len(),
        Some(RdpSolution::Stationary(_)) => 1,
        None => 0,
    }
}

/// Value-iteration sweeps performed; 0 for finite-horizon solutions.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdp_solution_iterations(solution: *const RdpSolution) -> usize {
    match solution.as_ref() {
        Some(RdpSolution::Stationary(v)) => v.iterations,
        _ => 0,
    }
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, cap: usize, written: *mut usize) -> Result<(), Fail> {
    write_out(written, src.len(), "written")?;
    if cap < src.len() {
        return Err(Fail::Small { needed: src.len() });
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

/// Copies the values of `layer` into `out` (capacity `cap`). `written`
/// receives the layer length even when the buffer is too small.
///
/// # Safety
/// `solution` must be a live handle; `out` must hold `cap` doubles; `written` writable.
#[no_mangle]
pub unsafe extern "C" fn rdp_solution_values(
    solution: *const RdpSolution,
    layer: usize,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> RdpStatus {
    guard(|| {
        let s = deref(solution, "solution")?;
        let layers = rdp_solution_layers(solution);
        let v = s.values(layer).ok_or(Error::IndexOutOfRange {
            what: "value layer",
            index: layer,
            len: layers,
        })?;
        copy_out(v, out, cap, written)
    })
}

/// Copies the greedy actions of `stage` (0-based) into `out`.
///
/// # Safety
/// As [`rdp_solution_values`], with `out` holding `cap` `size_t` entries.
#[no_mangle]
pub unsafe extern "C" fn rdp_solution_policy(
    solution: *const RdpSolution,
    stage: usize,
    out: *mut usize,
    cap: usize,
    written: *mut usize,
) -> RdpStatus {
    guard(|| {
        let s = deref(solution, "solution")?;
        let stages = match s {
            RdpSolution::Finite(f) => f.policy.len(),
            RdpSolution::Stationary(_) => 1,
        };
        let p = s.policy(stage).ok_or(Error::IndexOutOfRange {
            what: "policy stage",
            index: stage,
            len: stages,
        })?;
        copy_out(p, out, cap, written)
    })
}

/// JSON rendering of a solution; release with [`rdp_string_free`].
///
/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rdp_solution_to_json(solution: *const RdpSolution, out: *mut *mut c_char) -> RdpStatus {
    guard(|| {
        let s = deref(solution, "solution")?;
        let text = match s {
            RdpSolution::Finite(f) => serde_json::json!({ "V": f.values, "policy": f.policy }),
            RdpSolution::Stationary(v) => serde_json::json!({
                "V": v.value,
                "policy": v.policy,
                "iterations": v.iterations,
                "residual": v.residual,
            }),
        }
        .to_string();
        let c = CString::new(text).map_err(|e| Fail::Parse(e.to_string()))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rdp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Min-max analysis of the `rows x cols` matrix `psi` (row-major). `mix`
/// receives the optimal mixed strategy over rows (`rows` entries).
///
/// # Safety
/// `psi` must hold `rows * cols` doubles, `mix` `rows` doubles; `report` writable.
#[no_mangle]
pub unsafe extern "C" fn rdp_saddle_analyze(
    psi: *const f64,
    rows: usize,
    cols: usize,
    tol: f64,
    report: *mut RdpSaddleReport,
    mix: *mut f64,
) -> RdpStatus {
    guard(|| {
        let len = rows.checked_mul(cols).ok_or(Fail::Parse("matrix size overflows".into()))?;
        let data = slice_arg(psi, len, "psi")?;
        if cols == 0 {
            return Err(Error::InvalidMatrix("matrix is empty".into()).into());
        }
        let matrix = PsiMatrix::new(data.chunks(cols).map(<[f64]>::to_vec).collect())?;
        let r = analyze(&matrix, tol)?;
        let (has, (row, col)) = match r.saddle {
            Some(p) => (1, p),
            None => (0, (0, 0)),
        };
        if mix.is_null() {
            return Err(Fail::Null("mix"));
        }
        ptr::copy_nonoverlapping(r.mix.as_ptr(), mix, r.mix.len());
        write_out(
            report,
            RdpSaddleReport {
                primal: r.primal,
                dual: r.dual,
                randomized: r.randomized,
                gap: r.gap,
                has_saddle: has,
                saddle_row: row,
                saddle_col: col,
            },
            "report",
        )
    })
}
