//! C interface to the sphere-covering toolkit: opaque handles, integer
//! status codes, and JSON strings for structured data.
//!
//! Conventions:
//! - Every fallible call returns a [`TkStatus`]; `TK_STATUS_OK` is zero.
//! - After any non-OK status, [`tk_last_error_message`] returns a
//!   thread-local description of the failure, valid until the next
//!   library call on the same thread.
//! - Strings written through `char **` out-parameters are heap-allocated
//!   and must be released with [`tk_string_free`].
//! - Handles from [`tk_cover_parse`] must be released with
//!   [`tk_cover_free`].
//! - Status codes follow the CLI exit-code convention: 1 for domain
//!   failures (invalid covers, unusable curve systems), 2 for parse
//!   failures (malformed JSON, bad words or angles).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use thurston_kit::combine::combine;
use thurston_kit::curves::MulticurveSpec;
use thurston_kit::decompose::{decompose, TreeSpec};
use thurston_kit::fixtures::SelfCoverFile;
use thurston_kit::matrix::{rational_to_f64, CertifyOptions};
use thurston_kit::pullback::{pullback_class, transition_data};
use thurston_kit::recursion::{BranchedCoverRecursion, ValidationReport};
use thurston_kit::search::{search_obstruction, ObstructionOutcome, SearchBudget};
use thurston_kit::spider::{
    orbit_relation_residual, Bipartition, ExternalAngle, IterationStatus,
    PullbackIterationState, SpiderConfiguration, SpiderError, Thresholds,
};
use thurston_kit::words::Word;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TkStatus {
    Ok = 0,
    /// The input was well-formed but mathematically unusable.
    DomainError = 1,
    /// Malformed JSON, word, or angle syntax.
    ParseError = 2,
    NullArgument = 3,
    InvalidUtf8 = 4,
    /// An internal invariant failed; the handle remains usable.
    Panic = 5,
}

/// A validated self-covering of a marked sphere (opaque).
pub struct TkCover {
    recursion: BranchedCoverRecursion,
    report: ValidationReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("").expect("empty C string"));
}

type Failure = (TkStatus, String);

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL-free error text");
    });
}

fn domain<E: std::fmt::Display>(e: E) -> Failure {
    (TkStatus::DomainError, e.to_string())
}

fn parse<E: std::fmt::Display>(e: E) -> Failure {
    (TkStatus::ParseError, e.to_string())
}

fn guarded<F: FnOnce() -> Result<(), Failure>>(body: F) -> TkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            TkStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal error".to_string());
            set_error(&message);
            TkStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((TkStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TkStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn cover_ref<'a>(p: *const TkCover) -> Result<&'a TkCover, Failure> {
    p.as_ref()
        .ok_or((TkStatus::NullArgument, "cover handle is null".to_string()))
}

fn require_out<T>(out: *mut T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err((TkStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn write_json(out: *mut *mut c_char, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string(value).map_err(domain)?;
    let c = CString::new(text)
        .map_err(|_| (TkStatus::Panic, "JSON contained an interior NUL".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

fn to_value<T: serde::Serialize>(value: &T) -> Result<Value, Failure> {
    serde_json::to_value(value).map_err(domain)
}

/// Message for the most recent failure on this thread (empty after a
/// success).  The pointer is valid until the next library call on the
/// same thread.
#[no_mangle]
pub extern "C" fn tk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned through a `char **` out-parameter.
///
/// # Safety
/// `s` must have been produced by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn tk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a self-covering from its JSON description
/// (`{"punctures": [...], "degree": d, "generators": [{"perm": [...],
/// "lifts": [...]}, ...]}`) and writes a handle to `out`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tk_cover_parse(
    json: *const c_char,
    out: *mut *mut TkCover,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let text = read_str(json, "cover JSON")?;
        let file: SelfCoverFile = serde_json::from_str(text).map_err(parse)?;
        let recursion = file.to_recursion().map_err(domain)?;
        let report = recursion.validate().map_err(domain)?;
        *out = Box::into_raw(Box::new(TkCover { recursion, report }));
        Ok(())
    })
}

/// Releases a cover handle.
///
/// # Safety
/// `cover` must come from [`tk_cover_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tk_cover_free(cover: *mut TkCover) {
    if !cover.is_null() {
        drop(Box::from_raw(cover));
    }
}

/// Writes the covering degree to `out`.
///
/// # Safety
/// `cover` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tk_cover_degree(cover: *const TkCover, out: *mut usize) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        *out = cover_ref(cover)?.recursion.degree();
        Ok(())
    })
}

/// Writes the number of marked points to `out`.
///
/// # Safety
/// `cover` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tk_cover_puncture_count(
    cover: *const TkCover,
    out: *mut usize,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        *out = cover_ref(cover)?.recursion.source().n();
        Ok(())
    })
}

/// Writes the cover back out in its canonical JSON form.
///
/// # Safety
/// `cover` must be a live handle; `out` receives a string for
/// [`tk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_cover_to_json(
    cover: *const TkCover,
    out: *mut *mut c_char,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let cover = cover_ref(cover)?;
        let file = SelfCoverFile::from_recursion(&cover.recursion).map_err(domain)?;
        write_json(out, &to_value(&file)?)
    })
}

/// Writes the validation report: degree, puncture labels, portrait, and
/// peripheral cycle designations.
///
/// # Safety
/// `cover` must be a live handle; `out` receives a string for
/// [`tk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_cover_validation_json(
    cover: *const TkCover,
    out: *mut *mut c_char,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let cover = cover_ref(cover)?;
        let value = json!({
            "valid": true,
            "degree": cover.recursion.degree(),
            "punctures": cover.recursion.source().labels(),
            "report": to_value(&cover.report)?,
        });
        write_json(out, &value)
    })
}

/// Writes the orbifold summary: weights, signature, Euler characteristic
/// (exact, as a string), and type.
///
/// # Safety
/// `cover` must be a live handle; `out` receives a string for
/// [`tk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_cover_orbifold_json(
    cover: *const TkCover,
    out: *mut *mut c_char,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let cover = cover_ref(cover)?;
        let orbifold = cover.report.portrait.orbifold().map_err(domain)?;
        let mut value = to_value(&orbifold)?;
        value["hyperbolic"] = Value::Bool(orbifold.is_hyperbolic());
        write_json(out, &value)
    })
}

/// Writes the preimage components of the free-homotopy class of `word`
/// (a string such as `"x1x2"`), with their degrees and sheet supports.
///
/// # Safety
/// `cover` must be a live handle; `word` must be NUL-terminated; `out`
/// receives a string for [`tk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_cover_pullback_class_json(
    cover: *const TkCover,
    word: *const c_char,
    out: *mut *mut c_char,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let cover = cover_ref(cover)?;
        let word = Word::parse(read_str(word, "curve word")?).map_err(parse)?;
        let components = pullback_class(&cover.recursion, &word).map_err(domain)?;
        let degree_sum: usize = components.iter().map(|c| c.mapping_degree).sum();
        let value = json!({
            "curve": word.to_string(),
            "degree": cover.recursion.degree(),
            "degree_sum": degree_sum,
            "components": to_value(&components)?,
        });
        write_json(out, &value)
    })
}

/// Writes the transition matrix of a multicurve (JSON `{"sphere":
/// [...], "curves": [...]}`) together with a certified spectral-radius
/// enclosure.
///
/// # Safety
/// `cover` must be a live handle; `multicurve_json` must be
/// NUL-terminated; `out` receives a string for [`tk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_cover_transition_json(
    cover: *const TkCover,
    multicurve_json: *const c_char,
    out: *mut *mut c_char,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let cover = cover_ref(cover)?;
        let spec: MulticurveSpec =
            serde_json::from_str(read_str(multicurve_json, "multicurve JSON")?).map_err(parse)?;
        let multicurve = spec.build().map_err(domain)?;
        let data = transition_data(&cover.recursion, &multicurve).map_err(domain)?;
        let certificate = data
            .matrix
            .certify_spectral_radius(&CertifyOptions::default())
            .map_err(domain)?;
        let classes: Vec<String> =
            multicurve.classes().iter().map(|c| c.key().to_string()).collect();
        let value = json!({
            "classes": classes,
            "entries": to_value(&data.matrix)?,
            "escaped": to_value(&data.escaped)?,
            "stable": data.is_stable(),
            "spectral": to_value(&certificate)?,
        });
        write_json(out, &value)
    })
}

/// Runs the obstruction search with the given budget (saturation
/// iterations per seed, largest accumulated system) over the default
/// seeds and writes the verdict.
///
/// # Safety
/// `cover` must be a live handle; `out` receives a string for
/// [`tk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_cover_obstruction_json(
    cover: *const TkCover,
    max_iterations: u32,
    max_classes: u32,
    out: *mut *mut c_char,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let cover = cover_ref(cover)?;
        let budget = SearchBudget {
            max_iterations: max_iterations as usize,
            max_classes: max_classes as usize,
        };
        let outcome =
            search_obstruction(&cover.recursion, None, &budget, &CertifyOptions::default())
                .map_err(domain)?;
        let mut value = to_value(&outcome)?;
        if let ObstructionOutcome::Found { report }
        | ObstructionOutcome::CandidateUncertified { report } = &outcome
        {
            value["lambda"] = json!({
                "low": report.spectral.low.to_string(),
                "high": report.spectral.high.to_string(),
                "low_approx": rational_to_f64(&report.spectral.low),
                "high_approx": rational_to_f64(&report.spectral.high),
            });
        }
        write_json(out, &value)
    })
}

/// Cuts the cover along an invariant multicurve (JSON `{"sphere": [...],
/// "curves": [...]}`, regions inferred from the curve words) and writes
/// the resulting gluing manifest, the exact input of [`tk_combine_json`].
///
/// # Safety
/// `cover` must be a live handle; `multicurve_json` must be
/// NUL-terminated; `out` receives a string for [`tk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_cover_decompose_json(
    cover: *const TkCover,
    multicurve_json: *const c_char,
    out: *mut *mut c_char,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let cover = cover_ref(cover)?;
        let spec: MulticurveSpec =
            serde_json::from_str(read_str(multicurve_json, "multicurve JSON")?).map_err(parse)?;
        let multicurve = spec.build().map_err(domain)?;
        let tree = TreeSpec::infer(cover.recursion.source(), &multicurve).map_err(domain)?;
        let decomposition =
            decompose(&cover.recursion, &multicurve, &tree).map_err(domain)?;
        write_json(out, &to_value(&decomposition.manifest)?)
    })
}

/// Assembles a self-covering from a gluing manifest and writes it in the
/// canonical cover JSON form, ready for [`tk_cover_parse`].
///
/// # Safety
/// `manifest_json` must be NUL-terminated; `out` receives a string for
/// [`tk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_combine_json(
    manifest_json: *const c_char,
    out: *mut *mut c_char,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let manifest: thurston_kit::combine::CombineManifest =
            serde_json::from_str(read_str(manifest_json, "manifest JSON")?).map_err(parse)?;
        let combined = combine(&manifest).map_err(domain)?;
        let file = SelfCoverFile::from_recursion(&combined.recursion).map_err(domain)?;
        write_json(out, &to_value(&file)?)
    })
}

/// Runs the pullback iteration for a quadratic external angle `p/q` from
/// the standard start (or, with `has_seed`, a seeded random admissible
/// start) and writes the verdict: converged with the recovered
/// parameter, degenerate with the shrinking classes, or indeterminate.
///
/// # Safety
/// `angle` must be NUL-terminated; `out` receives a string for
/// [`tk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tk_spider_run_json(
    angle: *const c_char,
    max_steps: u32,
    has_seed: bool,
    seed: u64,
    out: *mut *mut c_char,
) -> TkStatus {
    guarded(|| {
        require_out(out, "out")?;
        let angle = ExternalAngle::parse(read_str(angle, "angle")?).map_err(|e| match e {
            SpiderError::BadAngle => parse(e),
            other => domain(other),
        })?;
        let start = if has_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            SpiderConfiguration::admissible_start(angle, &mut rng)
        } else {
            SpiderConfiguration::standard_start(angle)
        };
        let thresholds = Thresholds::default();
        let tracked = Bipartition::all_pairs(start.points().len());
        let mut state =
            PullbackIterationState::new(start, tracked, &thresholds).map_err(domain)?;
        state.run(max_steps as usize, &thresholds).map_err(domain)?;

        let mut value = json!({
            "angle": format!("{}/{}", angle.numer(), angle.denom()),
            "steps": state.steps(),
            "tracked": state.tracked().iter().map(Bipartition::label).collect::<Vec<_>>(),
        });
        match state.status() {
            IterationStatus::Converged { c } => {
                value["status"] = json!("converged");
                value["c"] = json!({ "re": c.re, "im": c.im });
                value["residual"] = json!(orbit_relation_residual(angle, *c));
            }
            IterationStatus::Degenerate { shrinking, collision } => {
                value["status"] = json!("degenerate");
                value["shrinking"] =
                    json!(shrinking.iter().map(Bipartition::label).collect::<Vec<_>>());
                value["collision"] = json!(collision);
            }
            IterationStatus::Indeterminate { reason } => {
                value["status"] = json!("indeterminate");
                value["reason"] = json!(reason);
            }
            IterationStatus::Running => {
                value["status"] = json!("indeterminate");
                value["reason"] = json!("step budget exhausted without a verdict");
            }
        }
        write_json(out, &value)
    })
}
