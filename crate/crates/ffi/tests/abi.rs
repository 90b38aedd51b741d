//! Exercises the C ABI from Rust: handle lifecycle, status codes, error
//! messages, and the JSON payloads.

use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use serde_json::Value;
use thurston_kit_ffi::*;

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name);
    std::fs::read_to_string(path).expect("reading fixture")
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tk_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn parse_cover(json: &str) -> *mut TkCover {
    let text = cstr(json);
    let mut handle: *mut TkCover = ptr::null_mut();
    let status = unsafe { tk_cover_parse(text.as_ptr(), &mut handle) };
    assert_eq!(status, TkStatus::Ok, "parse failed: {}", last_error());
    assert!(!handle.is_null());
    handle
}

fn take_json(fill: impl FnOnce(*mut *mut c_char) -> TkStatus) -> Value {
    let mut out: *mut c_char = ptr::null_mut();
    let status = fill(&mut out);
    assert_eq!(status, TkStatus::Ok, "call failed: {}", last_error());
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
    unsafe { tk_string_free(out) };
    serde_json::from_str(&text).expect("output is JSON")
}

#[test]
fn parse_getters_and_roundtrip() {
    let source = fixture("z2i.json");
    let cover = parse_cover(&source);

    let mut degree = 0usize;
    assert_eq!(unsafe { tk_cover_degree(cover, &mut degree) }, TkStatus::Ok);
    assert_eq!(degree, 2);
    let mut punctures = 0usize;
    assert_eq!(unsafe { tk_cover_puncture_count(cover, &mut punctures) }, TkStatus::Ok);
    assert_eq!(punctures, 4);
    assert_eq!(last_error(), "");

    let emitted = take_json(|out| unsafe { tk_cover_to_json(cover, out) });
    let original: Value = serde_json::from_str(&source).unwrap();
    assert_eq!(emitted, original);

    unsafe { tk_cover_free(cover) };
}

#[test]
fn validation_and_orbifold_payloads() {
    let cover = parse_cover(&fixture("z2i.json"));

    let validation = take_json(|out| unsafe { tk_cover_validation_json(cover, out) });
    assert_eq!(validation["valid"], true);
    assert_eq!(validation["degree"], 2);
    assert_eq!(validation["punctures"], serde_json::json!(["i", "i-1", "-i", "inf"]));
    assert!(validation["report"]["portrait"].is_object());

    let orbifold = take_json(|out| unsafe { tk_cover_orbifold_json(cover, out) });
    assert_eq!(orbifold["signature"], serde_json::json!([2, 2, 2, "inf"]));
    assert_eq!(orbifold["euler_characteristic"], "-1/2");
    assert_eq!(orbifold["orbifold_type"], "hyperbolic");
    assert_eq!(orbifold["hyperbolic"], true);

    unsafe { tk_cover_free(cover) };
}

#[test]
fn pullback_components_sum_to_the_degree() {
    let cover = parse_cover(&fixture("z2i.json"));
    let word = cstr("x1x2");
    let v = take_json(|out| unsafe { tk_cover_pullback_class_json(cover, word.as_ptr(), out) });
    assert_eq!(v["degree"], 2);
    assert_eq!(v["degree_sum"], 2);
    let total: u64 = v["components"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["mapping_degree"].as_u64().unwrap())
        .sum();
    assert_eq!(total, 2);
    unsafe { tk_cover_free(cover) };
}

#[test]
fn transition_matrix_of_the_levy_curve() {
    let cover = parse_cover(&fixture("levy-pair.cover.json"));
    let multicurve = cstr(&fixture("levy-pair.multicurve.json"));
    let v =
        take_json(|out| unsafe { tk_cover_transition_json(cover, multicurve.as_ptr(), out) });
    assert_eq!(v["classes"], serde_json::json!(["x1x2"]));
    assert_eq!(v["entries"], serde_json::json!([["1"]]));
    assert_eq!(v["stable"], true);
    assert_eq!(v["spectral"]["comparison_with_one"], "at_least");
    assert_eq!(v["spectral"]["low"], "1");
    assert_eq!(v["spectral"]["high"], "1");
    unsafe { tk_cover_free(cover) };
}

#[test]
fn obstruction_verdicts() {
    let levy = parse_cover(&fixture("levy-pair.cover.json"));
    let v = take_json(|out| unsafe { tk_cover_obstruction_json(levy, 10, 64, out) });
    assert_eq!(v["verdict"], "found");
    assert_eq!(v["lambda"]["low"], "1");
    assert_eq!(v["lambda"]["high"], "1");
    unsafe { tk_cover_free(levy) };

    let quadratic = parse_cover(&fixture("z2i.json"));
    let v = take_json(|out| unsafe { tk_cover_obstruction_json(quadratic, 10, 64, out) });
    assert_eq!(v["verdict"], "none_found_within_budget");
    assert_eq!(v["budget_exhausted"], serde_json::json!([]));
    unsafe { tk_cover_free(quadratic) };
}

#[test]
fn decompose_combine_roundtrip_through_the_abi() {
    // A cut along no curves reassembles to the identical cover.
    let source = fixture("z2i.json");
    let cover = parse_cover(&source);
    let empty = cstr(r#"{"sphere": ["i", "i-1", "-i", "inf"], "curves": []}"#);
    let manifest =
        take_json(|out| unsafe { tk_cover_decompose_json(cover, empty.as_ptr(), out) });
    assert_eq!(manifest["nodes"].as_array().unwrap().len(), 1);
    let manifest_text = cstr(&serde_json::to_string(&manifest).unwrap());
    let rebuilt = take_json(|out| unsafe { tk_combine_json(manifest_text.as_ptr(), out) });
    let original: Value = serde_json::from_str(&source).unwrap();
    assert_eq!(rebuilt, original);
    unsafe { tk_cover_free(cover) };

    // A genuine cut: the Levy pair along its gluing curve, regions
    // inferred; the reassembled cover has the original invariants.
    let levy = parse_cover(&fixture("levy-pair.cover.json"));
    let multicurve = cstr(&fixture("levy-pair.multicurve.json"));
    let manifest =
        take_json(|out| unsafe { tk_cover_decompose_json(levy, multicurve.as_ptr(), out) });
    assert_eq!(manifest["nodes"].as_array().unwrap().len(), 2);
    let manifest_text = cstr(&serde_json::to_string(&manifest).unwrap());
    let rebuilt = take_json(|out| unsafe { tk_combine_json(manifest_text.as_ptr(), out) });
    let rebuilt_handle = parse_cover(&serde_json::to_string(&rebuilt).unwrap());
    let mut degree = 0usize;
    assert_eq!(unsafe { tk_cover_degree(rebuilt_handle, &mut degree) }, TkStatus::Ok);
    assert_eq!(degree, 2);
    let rebuilt_orb = take_json(|out| unsafe { tk_cover_orbifold_json(rebuilt_handle, out) });
    let original_orb = take_json(|out| unsafe { tk_cover_orbifold_json(levy, out) });
    assert_eq!(rebuilt_orb, original_orb);
    unsafe { tk_cover_free(rebuilt_handle) };
    unsafe { tk_cover_free(levy) };
}

#[test]
fn spider_run_converges_at_one_sixth() {
    let angle = cstr("1/6");
    let v = take_json(|out| unsafe { tk_spider_run_json(angle.as_ptr(), 200, false, 0, out) });
    assert_eq!(v["status"], "converged");
    let re = v["c"]["re"].as_f64().unwrap();
    let im = v["c"]["im"].as_f64().unwrap();
    assert!((re.powi(2) + (im - 1.0).powi(2)).sqrt() < 1e-6);
    assert!(v["residual"].as_f64().unwrap() < 1e-8);

    let seeded = take_json(|out| unsafe { tk_spider_run_json(angle.as_ptr(), 200, true, 7, out) });
    assert_eq!(seeded["status"], "converged");
}

#[test]
fn status_codes_and_error_messages() {
    // Null arguments.
    let mut handle: *mut TkCover = ptr::null_mut();
    assert_eq!(
        unsafe { tk_cover_parse(ptr::null(), &mut handle) },
        TkStatus::NullArgument
    );
    assert!(!last_error().is_empty());
    let valid = cstr(&fixture("z2i.json"));
    assert_eq!(
        unsafe { tk_cover_parse(valid.as_ptr(), ptr::null_mut()) },
        TkStatus::NullArgument
    );

    // Malformed JSON parses with status 2 and a message.
    let truncated = cstr("{\"punctures\": [");
    assert_eq!(
        unsafe { tk_cover_parse(truncated.as_ptr(), &mut handle) },
        TkStatus::ParseError
    );
    assert!(!last_error().is_empty());

    // Well-formed JSON describing a non-cover is a domain error.
    let mut corrupt: Value = serde_json::from_str(&fixture("z2i.json")).unwrap();
    corrupt["generators"][0]["perm"] = serde_json::json!([1, 1]);
    let corrupt = cstr(&serde_json::to_string(&corrupt).unwrap());
    assert_eq!(
        unsafe { tk_cover_parse(corrupt.as_ptr(), &mut handle) },
        TkStatus::DomainError
    );
    assert!(last_error().contains("not a permutation"));

    // Word and angle syntax errors.
    let cover = parse_cover(&fixture("z2i.json"));
    let bad_word = cstr("q7");
    let mut out: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { tk_cover_pullback_class_json(cover, bad_word.as_ptr(), &mut out) },
        TkStatus::ParseError
    );
    let bad_angle = cstr("1/0");
    assert_eq!(
        unsafe { tk_spider_run_json(bad_angle.as_ptr(), 10, false, 0, &mut out) },
        TkStatus::ParseError
    );

    // A multicurve on the wrong sphere is a domain error.
    let mismatched = cstr(&fixture("levy-pair.multicurve.json"));
    assert_eq!(
        unsafe { tk_cover_transition_json(cover, mismatched.as_ptr(), &mut out) },
        TkStatus::DomainError
    );

    // A success clears the error message.
    let mut degree = 0usize;
    assert_eq!(unsafe { tk_cover_degree(cover, &mut degree) }, TkStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { tk_cover_free(cover) };
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        tk_string_free(ptr::null_mut());
        tk_cover_free(ptr::null_mut());
    }
}

#[test]
fn committed_header_is_current() {
    let header = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tk.h"),
    )
    .expect("include/tk.h is committed");
    for symbol in [
        "tk_cover_parse",
        "tk_cover_free",
        "tk_cover_orbifold_json",
        "tk_cover_obstruction_json",
        "tk_combine_json",
        "tk_spider_run_json",
        "tk_string_free",
        "TK_STATUS_OK",
        "TK_STATUS_DOMAIN_ERROR",
        "TK_STATUS_PARSE_ERROR",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}
